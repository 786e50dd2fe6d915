/** Wire types for the review service (see ../docs/wire_protocol.md for the
 * backend protocol; these are the curation routes). */

export interface QueueItem {
  track_id: string;
  category: string;
  temporal_roughness: number;
  mean_flow: number | null;
  mean_occlusion: number | null;
  n_frames: number;
}

export interface QueueResponse {
  pending: QueueItem[];
}

export const CRITERIA_KEYS = [
  "no_heavy_occlusion",
  "smooth_body_motion",
  "smooth_camera_motion",
  "mask_complete",
  "keypoints_accurate",
] as const;

export type CriterionKey = (typeof CRITERIA_KEYS)[number];
export type Criteria = Record<CriterionKey, boolean>;

export const CRITERIA_LABELS: Record<CriterionKey, string> = {
  no_heavy_occlusion: "No heavy occlusion by other objects (legs especially)",
  smooth_body_motion: "Recognizable, smooth body-part motion",
  smooth_camera_motion: "Smooth camera movement",
  mask_complete: "Mask segments the animal without missing body parts",
  keypoints_accurate: "Keypoints track the joints accurately and smoothly",
};

export type Decision = "accept" | "reject";

export interface DecisionBody {
  decision: Decision;
  criteria: Criteria;
  reviewer?: string;
}

export interface Stats {
  review: { pending: number; accepted: number; rejected: number };
}

export const MEDIA_KINDS = ["rgb", "masked", "keypoints"] as const;
export type MediaKind = (typeof MEDIA_KINDS)[number];

export function allTrueCriteria(): Criteria {
  return Object.fromEntries(CRITERIA_KEYS.map((k) => [k, true])) as Criteria;
}
