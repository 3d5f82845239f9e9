"""Attention-level estimation toolkit.

Turns per-frame pose keypoints and depth maps into low/mid/high attention
predictions (geometric features + fusion networks), and provides the
multi-labeler voting machinery and labeling service used to annotate the
underlying video frames.
"""

__version__ = "0.1.0"
