import math
import time

import numpy as np
import pytest

from attnlevel.geometry import (
    GF_DIM,
    GF_FEATURE_NAMES,
    DegenerateGeometryError,
    body_face_distances,
    eye_contour_distances,
    face_distances,
    geometric_feature_vector,
    shoulder_nose_angles,
)
from attnlevel.pose_ingest import FrameSpace, KeypointFrame, KeypointId, to_nose_origin


def straightline_features(coords):
    """Independent recomputation of all 26 entries with plain math only."""

    def d(p, q):
        return math.hypot(q[0] - p[0], q[1] - p[1])

    nose, leye, reye = coords[0], coords[1], coords[2]
    neck, lsh, rsh = coords[3], coords[4], coords[5]
    out = [d(nose, leye), d(nose, reye), d(leye, reye)]
    for b in (neck, lsh, rsh):
        for f in (nose, leye, reye):
            out.append(d(b, f))
    for i in range(6):
        out.append(d(coords[6 + i], leye))
    for i in range(6):
        out.append(d(coords[12 + i], reye))

    def unit(p, q):
        dx, dy = q[0] - p[0], q[1] - p[1]
        n = math.sqrt(dx * dx + dy * dy)
        return (dx / n, dy / n)

    v1, v2, v3 = unit(neck, nose), unit(neck, lsh), unit(neck, rsh)

    def ang(u, v):
        dot = max(-1.0, min(1.0, u[0] * v[0] + u[1] * v[1]))
        return math.acos(dot)

    out.extend([ang(v1, v2), ang(v1, v3)])
    return out


def random_origin_frame(rng):
    coords = rng.uniform(-400.0, 400.0, size=(18, 2))
    coords[KeypointId.NOSE] = 0.0
    return KeypointFrame(0, coords, space=FrameSpace.NOSE_ORIGIN)


def make_frame(**overrides):
    rng = np.random.default_rng(0)
    coords = rng.uniform(-200.0, 200.0, size=(18, 2))
    for k, v in overrides.items():
        coords[KeypointId[k.upper()]] = v
    return KeypointFrame(0, coords)


class TestFaceDistances:
    def test_3_4_5_triangle(self):
        frame = make_frame(nose=(0, 0), left_eye_center=(3, 4), right_eye_center=(0, 5))
        assert face_distances(frame) == pytest.approx([5.0, 5.0, math.sqrt(10)], rel=1e-12)

    def test_coincident(self):
        frame = make_frame(nose=(7, 7), left_eye_center=(7, 7), right_eye_center=(7, 7))
        assert np.all(face_distances(frame) == 0.0)

    def test_translation_invariant(self):
        frame = make_frame()
        shifted = KeypointFrame(0, frame.coords + np.array([123.4, -56.7]))
        assert np.allclose(face_distances(frame), face_distances(shifted), rtol=0, atol=1e-9)


class TestBodyFaceDistances:
    def test_axis_aligned_entry(self):
        frame = make_frame(neck=(0, -10), nose=(0, 0))
        out = body_face_distances(frame)
        assert out[0] == pytest.approx(10.0, rel=1e-12)  # neck-nose is the first entry

    def test_all_coincident(self):
        coords = np.tile([5.0, 5.0], (18, 1))
        assert np.all(body_face_distances(KeypointFrame(0, coords)) == 0.0)

    def test_shoulder_swap_permutes_blocks(self):
        # the layout is (neck f1 f2 f3, lshoulder f1 f2 f3, rshoulder f1 f2 f3):
        # swapping shoulder coordinates must swap exactly the last two blocks
        frame = make_frame()
        swapped_coords = frame.coords.copy()
        swapped_coords[[KeypointId.LEFT_SHOULDER, KeypointId.RIGHT_SHOULDER]] = swapped_coords[
            [KeypointId.RIGHT_SHOULDER, KeypointId.LEFT_SHOULDER]
        ]
        a = body_face_distances(frame)
        b = body_face_distances(KeypointFrame(0, swapped_coords))
        assert np.allclose(a[0:3], b[0:3], rtol=0, atol=0)
        assert np.allclose(a[3:6], b[6:9], rtol=0, atol=0)
        assert np.allclose(a[6:9], b[3:6], rtol=0, atol=0)


class TestEyeContours:
    def test_circle_radius(self):
        coords = np.random.default_rng(1).uniform(-50, 50, size=(18, 2))
        center = np.array([10.0, -4.0])
        coords[KeypointId.LEFT_EYE_CENTER] = center
        for i in range(6):
            angle = i * np.pi / 3
            coords[KeypointId.LEFT_EYE_1 + i] = center + 2.0 * np.array([np.cos(angle), np.sin(angle)])
        out = eye_contour_distances(KeypointFrame(0, coords), "left")
        assert out == pytest.approx([2.0] * 6, rel=1e-12)

    def test_closed_eye_zeros(self):
        coords = np.random.default_rng(2).uniform(-50, 50, size=(18, 2))
        coords[KeypointId.RIGHT_EYE_CENTER] = (3.0, 3.0)
        for i in range(6):
            coords[KeypointId.RIGHT_EYE_1 + i] = (3.0, 3.0)
        out = eye_contour_distances(KeypointFrame(0, coords), "right")
        assert np.all(out == 0.0)

    def test_mirror_swaps_eyes(self):
        # reflect x and swap left/right roles: D_LE of the mirror equals D_RE
        frame = make_frame()
        mirrored = frame.coords.copy()
        mirrored[:, 0] *= -1.0
        swap = {
            KeypointId.LEFT_EYE_CENTER: KeypointId.RIGHT_EYE_CENTER,
            KeypointId.RIGHT_EYE_CENTER: KeypointId.LEFT_EYE_CENTER,
        }
        for i in range(6):
            swap[KeypointId.LEFT_EYE_1 + i] = KeypointId.RIGHT_EYE_1 + i
            swap[KeypointId.RIGHT_EYE_1 + i] = KeypointId.LEFT_EYE_1 + i
        reordered = mirrored.copy()
        for src, dst in swap.items():
            reordered[dst] = mirrored[src]
        out_le = eye_contour_distances(KeypointFrame(0, frame.coords), "left")
        out_re = eye_contour_distances(KeypointFrame(0, reordered), "right")
        assert np.allclose(out_le, out_re, rtol=0, atol=1e-9)

    def test_unknown_eye(self):
        with pytest.raises(ValueError):
            eye_contour_distances(make_frame(), "middle")


class TestAngles:
    def test_perpendicular(self):
        frame = make_frame(nose=(0, 1), neck=(0, 0), left_shoulder=(-1, 0), right_shoulder=(1, 0))
        _, angles = shoulder_nose_angles(frame)
        assert angles == pytest.approx([np.pi / 2, np.pi / 2], rel=1e-12)

    def test_antiparallel(self):
        frame = make_frame(nose=(0, 1), neck=(0, 0), left_shoulder=(0, -1), right_shoulder=(2, 0))
        _, angles = shoulder_nose_angles(frame)
        assert angles[0] == pytest.approx(np.pi, rel=1e-12)

    def test_rotation_invariant(self):
        frame = make_frame()
        theta = 0.7
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        rotated = KeypointFrame(0, frame.coords @ rot.T)
        _, a0 = shoulder_nose_angles(frame)
        _, a1 = shoulder_nose_angles(rotated)
        assert np.allclose(a0, a1, rtol=0, atol=1e-9)

    def test_unit_vectors_normalized(self):
        vectors, _ = shoulder_nose_angles(make_frame())
        for v in (vectors.v1, vectors.v2, vectors.v3):
            assert abs(np.linalg.norm(v) - 1.0) < 1e-9

    def test_degenerate_raises(self):
        frame = make_frame(nose=(5, 5), neck=(5, 5))
        with pytest.raises(DegenerateGeometryError, match="nose and neck"):
            shoulder_nose_angles(frame)


class TestFeatureVector:
    def origin_frame(self, seed=0):
        return random_origin_frame(np.random.default_rng(seed))

    def test_layout_head_is_face_distances(self):
        frame = self.origin_frame()
        gf = geometric_feature_vector(frame)
        assert np.array_equal(gf.vector()[0:3], face_distances(frame))

    def test_length_26(self):
        # 3 face pairs + 3*3 body-face + 6 + 6 contours + 2 angles
        assert GF_DIM == 3 + 9 + 6 + 6 + 2
        for seed in range(5):
            assert len(geometric_feature_vector(self.origin_frame(seed)).vector()) == 26
        assert len(GF_FEATURE_NAMES) == 26

    def test_requires_nose_origin(self):
        with pytest.raises(ValueError):
            geometric_feature_vector(make_frame())

    def test_single_keypoint_perturbation_is_local(self):
        # dependency map: entries whose formula mentions the perturbed
        # keypoint change, all others stay bit-identical.
        # layout: 0-2 face pairs, 3-11 body-face (neck/lsh/rsh rows), 12-17
        # left contour, 18-23 right contour, 24-25 angles (lsh then rsh)
        frame = self.origin_frame(3)
        base = geometric_feature_vector(frame).vector()

        dependents = {
            KeypointId.LEFT_SHOULDER: {6, 7, 8, 24},
            KeypointId.LEFT_EYE_2: {13},
            KeypointId.RIGHT_EYE_CENTER: {1, 2, 5, 8, 11} | set(range(18, 24)),
        }

        for kp, expected in dependents.items():
            perturbed = frame.coords.copy()
            perturbed[kp] += (1.5, -2.5)
            new = geometric_feature_vector(
                KeypointFrame(0, perturbed, space=FrameSpace.NOSE_ORIGIN)
            ).vector()
            changed = {i for i in range(26) if new[i] != base[i]}
            assert changed == expected, f"{kp.name}: {sorted(changed)} != {sorted(expected)}"


class TestInvariances:
    def test_translation_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            frame = random_origin_frame(rng)
            offset = rng.uniform(-500, 500, size=2)
            shifted = to_nose_origin(KeypointFrame(0, frame.coords + offset))
            a = geometric_feature_vector(frame).vector()
            b = geometric_feature_vector(shifted).vector()
            assert np.allclose(a, b, rtol=0, atol=1e-9)

    def test_rotation_invariance(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            frame = random_origin_frame(rng)
            theta = rng.uniform(0, 2 * np.pi)
            rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
            rotated = KeypointFrame(0, frame.coords @ rot.T, space=FrameSpace.NOSE_ORIGIN)
            a = geometric_feature_vector(frame).vector()
            b = geometric_feature_vector(rotated).vector()
            assert np.allclose(a, b, rtol=0, atol=1e-9)

    def test_uniform_scaling(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            frame = random_origin_frame(rng)
            s = rng.uniform(0.1, 10.0)
            scaled = KeypointFrame(0, frame.coords * s, space=FrameSpace.NOSE_ORIGIN)
            a = geometric_feature_vector(frame)
            b = geometric_feature_vector(scaled)
            assert np.allclose(b.vector()[:24], s * a.vector()[:24], rtol=1e-9, atol=1e-9)
            assert np.allclose(b.a, a.a, rtol=0, atol=1e-9)

    def test_nonnegative_distances_and_angle_range(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            gf = geometric_feature_vector(random_origin_frame(rng))
            assert np.all(gf.vector()[:24] >= 0.0)
            assert np.all(gf.a >= 0.0) and np.all(gf.a <= np.pi)


class TestBruteForceOracle:
    def test_1000_random_frames_match_straightline(self):
        rng = np.random.default_rng(123)
        start = time.monotonic()
        for _ in range(1000):
            frame = random_origin_frame(rng)
            got = geometric_feature_vector(frame).vector()
            want = np.array(straightline_features(frame.coords))
            assert np.allclose(got, want, rtol=1e-12, atol=1e-12)
        assert time.monotonic() - start < 5.0
