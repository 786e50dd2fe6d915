"""Evaluation metrics: silhouette IoU, PCK, keypoint transfer, MPJVE, plus the
keypoint-MSE and temporal-roughness diagnostics used during curation.

Keypoint validity uses a confidence floor of 0.3 on ground truth. PCK-style
comparisons are inclusive at the threshold, and fractions are reported as
(correct, valid) count pairs so callers can pool across frames and sequences.
"""

from __future__ import annotations

import logging

import numpy as np

from .geometry import Keypoints, Mask, mask_iou

log = logging.getLogger(__name__)

CONFIDENCE_FLOOR = 0.3
PCK_ALPHAS = (0.1, 0.05)


def silhouette_iou(pred: Mask, gt: Mask) -> float:
    return mask_iou(pred, gt)


def sequence_silhouette_iou(preds: list[Mask], gts: list[Mask]) -> float:
    if len(preds) != len(gts):
        raise ValueError(f"sequence length mismatch: {len(preds)} vs {len(gts)}")
    return float(np.mean([mask_iou(p, g) for p, g in zip(preds, gts)]))


def pck_counts(pred: Keypoints, gt: Keypoints, gt_mask_area: float, alpha: float,
               conf_floor: float = CONFIDENCE_FLOOR) -> tuple[int, int]:
    """(correct, valid) for one frame; threshold = alpha * sqrt(mask area)."""
    if pred.count != gt.count:
        raise ValueError(f"joint count mismatch: {pred.count} vs {gt.count}")
    if gt_mask_area <= 0:
        raise ValueError("gt mask area must be positive")
    thresh = alpha * float(np.sqrt(gt_mask_area))
    valid = gt.confidence >= conf_floor
    dists = np.linalg.norm(pred.xy - gt.xy, axis=1)
    correct = int(np.count_nonzero(valid & (dists <= thresh)))
    return correct, int(np.count_nonzero(valid))


def pck(pred: Keypoints, gt: Keypoints, gt_mask_area: float, alpha: float) -> float:
    correct, valid = pck_counts(pred, gt, gt_mask_area, alpha)
    return correct / valid if valid else 0.0


def transfer_keypoints(src_kps: Keypoints, src_verts: np.ndarray,
                       tgt_verts: np.ndarray) -> np.ndarray:
    """Map each source keypoint to its nearest projected vertex and return
    that vertex's target-frame projection. Vertex arrays are (V, 2) with
    matching order across frames."""
    src_verts = np.asarray(src_verts, dtype=np.float64)
    tgt_verts = np.asarray(tgt_verts, dtype=np.float64)
    if src_verts.shape != tgt_verts.shape or src_verts.ndim != 2:
        raise ValueError("vertex sets must be (V, 2) and aligned")
    d = np.linalg.norm(src_kps.xy[:, None, :] - src_verts[None, :, :], axis=2)
    nearest = np.argmin(d, axis=1)  # ties resolve to the lowest index
    return tgt_verts[nearest]


def keypoint_transfer_counts(src_kps: Keypoints, tgt_kps: Keypoints,
                             src_verts: np.ndarray, tgt_verts: np.ndarray,
                             tgt_mask_area: float, alpha: float,
                             conf_floor: float = CONFIDENCE_FLOOR) -> tuple[int, int]:
    """(correct, valid) for one (source, target) pair. A joint is valid when
    confident in both frames; correct when the transferred point lands within
    alpha * sqrt(target mask area) of the target ground truth."""
    if tgt_mask_area <= 0:
        raise ValueError("target mask area must be positive")
    transferred = transfer_keypoints(src_kps, src_verts, tgt_verts)
    valid = (src_kps.confidence >= conf_floor) & (tgt_kps.confidence >= conf_floor)
    thresh = alpha * float(np.sqrt(tgt_mask_area))
    dists = np.linalg.norm(transferred - tgt_kps.xy, axis=1)
    correct = int(np.count_nonzero(valid & (dists <= thresh)))
    return correct, int(np.count_nonzero(valid))


def mpjve(pred_seq: np.ndarray, gt_seq: np.ndarray, norm: float) -> float:
    """Mean per-joint velocity error in normalized coordinates.

    Sequences are (T, K, 2); velocities are consecutive-frame differences
    divided by norm (the crop side), errors averaged over joints and steps.
    """
    pred = np.asarray(pred_seq, dtype=np.float64)
    gt = np.asarray(gt_seq, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"sequence shape mismatch: {pred.shape} vs {gt.shape}")
    if pred.shape[0] < 2:
        raise ValueError("mpjve needs at least 2 frames")
    if norm <= 0:
        raise ValueError("norm must be positive")
    v_pred = np.diff(pred, axis=0) / norm
    v_gt = np.diff(gt, axis=0) / norm
    return float(np.linalg.norm(v_gt - v_pred, axis=2).mean())


def keypoint_mse(pred: Keypoints, gt: Keypoints) -> float:
    """Squared Euclidean error summed over joints."""
    if pred.count != gt.count:
        raise ValueError(f"joint count mismatch: {pred.count} vs {gt.count}")
    return float(np.sum((pred.xy - gt.xy) ** 2))


def temporal_roughness(seq: np.ndarray) -> float:
    """Sum of squared first differences plus squared second differences.

    Zero iff the sequence is constant. Below 3 samples only the first term
    is computable; that case is flagged in the log.
    """
    arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if len(arr) < 2:
        return 0.0
    d1 = np.diff(arr, axis=0)
    first = float(np.sum(d1 * d1))
    if len(arr) < 3:
        log.warning("temporal_roughness on %d samples: second term skipped", len(arr))
        return first
    d2 = np.diff(d1, axis=0)
    return first + float(np.sum(d2 * d2))
