export interface Task {
  set_id: string;
  frame_index: number;
  image_url: string;
}

export interface Progress {
  done: number;
  total: number;
}

export interface AgreementSetRow {
  set_id: string;
  frames: number;
  pct_settled_annotators: number;
  pct_settled_with_checker: number;
}

export interface AgreementReport {
  per_set: AgreementSetRow[];
  mean_settled_annotators: number;
  std_settled_annotators: number;
  mean_settled_with_checker: number;
  std_settled_with_checker: number;
  global_settled_annotators: number;
  global_settled_with_checker: number;
  class_distribution: Record<string, number>;
  total_frames: number;
}

export interface AgreementPayload {
  votes_logged: number;
  frames_total: number;
  report: AgreementReport | null;
}

export type Role = "labeler" | "checker";

export const LABEL_KEYS = ["0", "1", "2"] as const;

export const LEVEL_DEFINITIONS: ReadonlyArray<{ key: string; name: string; text: string }> = [
  { key: "0", name: "low", text: "the subject is not paying attention to the task at hand" },
  { key: "1", name: "mid", text: "the subject is partially paying attention" },
  { key: "2", name: "high", text: "the subject is fully paying attention" },
];
