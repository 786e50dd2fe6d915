"""The evaluation contract: benchmark manifests, prediction sets, and the
metric report.

Manifest layout (all paths relative to the manifest's directory):
  manifest.json
  sequences/<track_id>/mask/%06d.png     ground-truth silhouettes (crop space)
  sequences/<track_id>/kp/%06d.json      ground-truth keypoints [[x, y, c], ...]
  sequences/<track_id>/crop_windows.json window geometry for mapping to frames

Prediction layout, one directory per sequence under the prediction root:
  <track_id>/mask/%06d.png, <track_id>/kp/%06d.json,
  <track_id>/vertices/%06d.json (optional, for keypoint transfer).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .geometry import DEFAULT_SKELETON, Keypoints, Mask

log = logging.getLogger(__name__)

DEFAULT_KT_STRIDE = 10
METRIC_COLUMNS = ("IoU", "PCK@0.1", "PCK@0.05", "KT-PCK@0.1", "KT-PCK@0.05", "MPJVE")


@dataclass
class SequenceEntry:
    track_id: str
    category: str
    frames: list[int]
    mask_dir: str
    kp_dir: str
    crop_windows: str

    @property
    def frame_count(self) -> int:
        return len(self.frames)


@dataclass
class BenchmarkManifest:
    skeleton: dict
    categories: list[str]
    crop_size: int
    sequences: list[SequenceEntry]
    root: Path = field(default=Path("."), repr=False)

    def to_dict(self) -> dict:
        return {
            "skeleton": self.skeleton,
            "categories": self.categories,
            "crop_size": self.crop_size,
            "sequences": [
                {"track_id": s.track_id, "category": s.category, "frames": s.frames,
                 "frame_count": s.frame_count, "mask_dir": s.mask_dir,
                 "kp_dir": s.kp_dir, "crop_windows": s.crop_windows}
                for s in self.sequences
            ],
        }


def write_manifest(manifest: BenchmarkManifest, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest.to_dict(), indent=1))
    return path


def load_manifest(path) -> BenchmarkManifest:
    path = Path(path)
    d = json.loads(path.read_text())
    return BenchmarkManifest(
        skeleton=d["skeleton"], categories=d["categories"], crop_size=d["crop_size"],
        sequences=[SequenceEntry(
            track_id=s["track_id"], category=s["category"], frames=s["frames"],
            mask_dir=s["mask_dir"], kp_dir=s["kp_dir"], crop_windows=s["crop_windows"])
            for s in d["sequences"]],
        root=path.parent,
    )


def manifest_missing_files(manifest: BenchmarkManifest) -> list[str]:
    """Every referenced file that does not exist (empty when valid)."""
    missing = []
    for seq in manifest.sequences:
        for f in seq.frames:
            for sub, ext in ((seq.mask_dir, "png"), (seq.kp_dir, "json")):
                p = manifest.root / sub / f"{f:06d}.{ext}"
                if not p.exists():
                    missing.append(str(p))
        if not (manifest.root / seq.crop_windows).exists():
            missing.append(str(manifest.root / seq.crop_windows))
    return missing


# -- prediction set ----------------------------------------------------------

@dataclass
class SequencePrediction:
    masks: list[Mask]
    keypoints: list[Keypoints]
    vertices: list[np.ndarray] | None  # (V, 2) per frame, constant V


def load_sequence_prediction(pred_root, seq: SequenceEntry) -> SequencePrediction:
    base = Path(pred_root) / seq.track_id
    if not base.exists():
        raise FileNotFoundError(f"no prediction directory for {seq.track_id}")
    masks, kps = [], []
    for f in seq.frames:
        masks.append(Mask.load_png(base / "mask" / f"{f:06d}.png"))
        kps.append(Keypoints.load(base / "kp" / f"{f:06d}.json"))
    vertices = None
    vdir = base / "vertices"
    if vdir.exists():
        vertices = []
        for f in seq.frames:
            arr = np.asarray(json.loads((vdir / f"{f:06d}.json").read_text()),
                             dtype=np.float64)
            vertices.append(arr.reshape(-1, 2))
        counts = {len(v) for v in vertices}
        if len(counts) != 1:
            raise ValueError(f"{seq.track_id}: vertex count varies across frames: {counts}")
    return SequencePrediction(masks=masks, keypoints=kps, vertices=vertices)


# -- evaluation ---------------------------------------------------------------

@dataclass
class _Accumulator:
    iou_values: list[float] = field(default_factory=list)
    pck: dict[float, list[int]] = field(default_factory=dict)  # alpha -> [correct, valid]
    kt: dict[float, list[int]] = field(default_factory=dict)
    mpjve_sum: float = 0.0
    mpjve_weight: int = 0
    has_kt: bool = False

    def add(self, other: "_Accumulator"):
        self.iou_values.extend(other.iou_values)
        for alpha, (c, v) in other.pck.items():
            acc = self.pck.setdefault(alpha, [0, 0])
            acc[0] += c
            acc[1] += v
        for alpha, (c, v) in other.kt.items():
            acc = self.kt.setdefault(alpha, [0, 0])
            acc[0] += c
            acc[1] += v
        self.mpjve_sum += other.mpjve_sum
        self.mpjve_weight += other.mpjve_weight
        self.has_kt = self.has_kt or other.has_kt

    def row(self, alphas) -> dict:
        out = {"IoU": float(np.mean(self.iou_values)) if self.iou_values else None}
        for alpha in alphas:
            c, v = self.pck.get(alpha, (0, 0))
            out[f"PCK@{alpha:g}"] = c / v if v else None
        for alpha in alphas:
            c, v = self.kt.get(alpha, (0, 0))
            out[f"KT-PCK@{alpha:g}"] = (c / v if v else None) if self.has_kt else None
        out["MPJVE"] = self.mpjve_sum / self.mpjve_weight if self.mpjve_weight else None
        return out


def evaluate_sequence(manifest: BenchmarkManifest, seq: SequenceEntry,
                      pred: SequencePrediction, alphas=metrics.PCK_ALPHAS,
                      kt_stride: int = DEFAULT_KT_STRIDE) -> _Accumulator:
    acc = _Accumulator()
    gt_masks, gt_kps = [], []
    for f in seq.frames:
        gt_masks.append(Mask.load_png(manifest.root / seq.mask_dir / f"{f:06d}.png"))
        gt_kps.append(Keypoints.load(manifest.root / seq.kp_dir / f"{f:06d}.json"))

    for i in range(len(seq.frames)):
        acc.iou_values.append(metrics.silhouette_iou(pred.masks[i], gt_masks[i]))
        area = gt_masks[i].area
        if area <= 0:
            log.warning("%s frame %d: empty gt mask, keypoint metrics skipped",
                        seq.track_id, seq.frames[i])
            continue
        for alpha in alphas:
            c, v = metrics.pck_counts(pred.keypoints[i], gt_kps[i], area, alpha)
            slot = acc.pck.setdefault(alpha, [0, 0])
            slot[0] += c
            slot[1] += v

    if pred.vertices is not None and len(seq.frames) > kt_stride:
        acc.has_kt = True
        t = 0
        while t + kt_stride < len(seq.frames):
            s, g = t, t + kt_stride
            area = gt_masks[g].area
            if area > 0:
                for alpha in alphas:
                    c, v = metrics.keypoint_transfer_counts(
                        gt_kps[s], gt_kps[g], pred.vertices[s], pred.vertices[g],
                        area, alpha)
                    slot = acc.kt.setdefault(alpha, [0, 0])
                    slot[0] += c
                    slot[1] += v
            t += kt_stride

    if len(seq.frames) >= 2:
        pred_seq = np.stack([k.xy for k in pred.keypoints])
        gt_seq = np.stack([k.xy for k in gt_kps])
        err = metrics.mpjve(pred_seq, gt_seq, norm=manifest.crop_size)
        acc.mpjve_sum += err * (len(seq.frames) - 1)
        acc.mpjve_weight += len(seq.frames) - 1
    return acc


@dataclass
class MethodReport:
    method: str
    overall: dict
    per_category: dict[str, dict]
    per_sequence: dict[str, dict]
    excluded: dict[str, str]


def evaluate(manifest: BenchmarkManifest, pred_root, method: str = "method",
             alphas=metrics.PCK_ALPHAS, kt_stride: int = DEFAULT_KT_STRIDE,
             per_sequence_mean: bool = False) -> MethodReport:
    """Score one method's prediction directory against the manifest.

    Aggregation pools frames across sequences (frame-weighted); pass
    per_sequence_mean=True to average per-sequence scores instead.
    """
    overall = _Accumulator()
    per_cat: dict[str, _Accumulator] = {}
    per_seq_rows: dict[str, dict] = {}
    excluded: dict[str, str] = {}
    seq_rows_for_mean: list[dict] = []

    for seq in manifest.sequences:
        try:
            pred = load_sequence_prediction(pred_root, seq)
        except (FileNotFoundError, OSError, ValueError) as exc:
            excluded[seq.track_id] = str(exc)
            continue
        try:
            acc = evaluate_sequence(manifest, seq, pred, alphas, kt_stride)
        except ValueError as exc:
            excluded[seq.track_id] = f"misaligned: {exc}"
            continue
        per_seq_rows[seq.track_id] = acc.row(alphas)
        seq_rows_for_mean.append(per_seq_rows[seq.track_id])
        overall.add(acc)
        per_cat.setdefault(seq.category, _Accumulator()).add(acc)

    if per_sequence_mean:
        def mean_rows(rows):
            out = {}
            for col in rows[0] if rows else []:
                vals = [r[col] for r in rows if r[col] is not None]
                out[col] = float(np.mean(vals)) if vals else None
            return out

        overall_row = mean_rows(seq_rows_for_mean)
        cat_rows = {}
        for cat in per_cat:
            rows = [per_seq_rows[s.track_id] for s in manifest.sequences
                    if s.category == cat and s.track_id in per_seq_rows]
            cat_rows[cat] = mean_rows(rows)
    else:
        overall_row = overall.row(alphas)
        cat_rows = {c: a.row(alphas) for c, a in per_cat.items()}

    return MethodReport(method=method, overall=overall_row, per_category=cat_rows,
                        per_sequence=per_seq_rows, excluded=excluded)


def format_table(reports: list[MethodReport]) -> str:
    """Aligned plain-text table, one row per method."""
    headers = ["Method", *METRIC_COLUMNS]
    rows = []
    for rep in reports:
        row = [rep.method]
        for col in METRIC_COLUMNS:
            v = rep.overall.get(col)
            row.append("-" if v is None else f"{v:.3f}")
        rows.append(row)
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)


def write_report(reports: list[MethodReport], out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = [
        {"method": r.method, "overall": r.overall, "per_category": r.per_category,
         "per_sequence": r.per_sequence, "excluded": r.excluded}
        for r in reports
    ]
    json_path = out_dir / "report.json"
    json_path.write_text(json.dumps(payload, indent=1))
    table_path = out_dir / "report.txt"
    table_path.write_text(format_table(reports) + "\n")
    return json_path, table_path


# -- export from curated tracks ----------------------------------------------

def collect_predictions(data_root, out_dir, track_ids: list[str] | None = None) -> list[str]:
    """Assemble a prediction set from pipeline track output (masks from the
    tracking stage, keypoints from the feature stage)."""
    import shutil

    data_root = Path(data_root)
    out_dir = Path(out_dir)
    collected = []
    for track_dir in sorted((data_root / "tracks").iterdir()):
        tid = track_dir.name
        if track_ids is not None and tid not in track_ids:
            continue
        if not (track_dir / "features" / "summary.json").exists():
            continue
        dst = out_dir / tid
        if dst.exists():
            shutil.rmtree(dst)
        dst.mkdir(parents=True)
        shutil.copytree(track_dir / "mask", dst / "mask")
        shutil.copytree(track_dir / "features" / "kp", dst / "kp")
        collected.append(tid)
    return collected


def build_gt_manifest_from_scenes(scenes: dict, data_root, out_dir,
                                  crop_size: int) -> BenchmarkManifest:
    """Project scene ground truth through each track's recorded crop windows,
    producing the reference annotations the pipeline output is scored against.

    scenes maps video_id -> rendered scene. Tracks are matched to actors by
    mask IoU at their first frame.
    """
    import json as _json

    from .geometry import mask_iou
    from .tracking import extract_crop, load_crop_windows, uncrop_mask

    data_root = Path(data_root)
    out_dir = Path(out_dir)
    entries: list[SequenceEntry] = []
    categories = set()
    for track_dir in sorted((data_root / "tracks").iterdir()):
        tid = track_dir.name
        if not (track_dir / "features" / "summary.json").exists():
            continue
        prov = _json.loads((track_dir / "provenance.json").read_text())
        clip_info = _json.loads(
            (data_root / "clips" / prov["clip_id"] / "clip.json").read_text())
        rendered = scenes[clip_info["video_id"]]
        source_frames = clip_info["source_frames"]
        windows = load_crop_windows(track_dir)
        frames = [w.frame for w in windows]

        first_mask = Mask.load_png(track_dir / "mask" / f"{frames[0]:06d}.png")
        first_src = source_frames[frames[0]]
        full = uncrop_mask(first_mask.bits, windows[0],
                           rendered.spec.height, rendered.spec.width)
        actor_id, best = None, 0.0
        for aid, per in rendered.gt.actors.items():
            if first_src in per:
                iou = mask_iou(full, per[first_src].full_mask)
                if iou > best:
                    actor_id, best = aid, iou
        if actor_id is None:
            log.warning("track %s matches no scene actor; skipped", tid)
            continue

        seq_dir = out_dir / "sequences" / tid
        (seq_dir / "mask").mkdir(parents=True, exist_ok=True)
        (seq_dir / "kp").mkdir(parents=True, exist_ok=True)
        for f, win in zip(frames, windows):
            src = source_frames[f]
            gt = rendered.gt.actors[actor_id][src]
            crop_bits, _ = extract_crop(gt.full_mask.bits, win)
            Mask(crop_bits).save_png(seq_dir / "mask" / f"{f:06d}.png")
            x0, y0, side = win.rect
            scale = win.out_size / side
            pts = gt.keypoints.pts.copy()
            pts[:, 0] = (pts[:, 0] - x0) * scale
            pts[:, 1] = (pts[:, 1] - y0) * scale
            Keypoints(pts).save(seq_dir / "kp" / f"{f:06d}.json")
        import shutil

        shutil.copy(track_dir / "crop_windows.json", seq_dir / "crop_windows.json")
        categories.add(clip_info["category"])
        entries.append(SequenceEntry(
            track_id=tid, category=clip_info["category"], frames=frames,
            mask_dir=f"sequences/{tid}/mask", kp_dir=f"sequences/{tid}/kp",
            crop_windows=f"sequences/{tid}/crop_windows.json"))

    manifest = BenchmarkManifest(skeleton=DEFAULT_SKELETON, categories=sorted(categories),
                                 crop_size=crop_size, sequences=entries, root=out_dir)
    write_manifest(manifest, out_dir / "manifest.json")
    return manifest


def export_benchmark(accepted: list[dict], out_dir, crop_size: int,
                     skeleton: dict | None = None,
                     per_category_cap: int = 10) -> BenchmarkManifest:
    """Build a self-contained benchmark from accepted track records.

    Each record: {"track_id", "category", "track_dir", "accepted_at"}.
    Per category, the earliest-accepted tracks win up to the cap. Annotation
    files are copied under out_dir/sequences/ and verified.
    """
    import shutil

    if not accepted:
        raise ValueError("no accepted tracks to export")
    out_dir = Path(out_dir)
    by_cat: dict[str, list[dict]] = {}
    for rec in sorted(accepted, key=lambda r: (r.get("accepted_at", 0), r["track_id"])):
        by_cat.setdefault(rec["category"], []).append(rec)

    entries: list[SequenceEntry] = []
    for cat in sorted(by_cat):
        for rec in by_cat[cat][:per_category_cap]:
            tid = rec["track_id"]
            src = Path(rec["track_dir"])
            dst = out_dir / "sequences" / tid
            if dst.exists():
                shutil.rmtree(dst)
            dst.mkdir(parents=True)
            shutil.copytree(src / "mask", dst / "mask")
            shutil.copytree(src / "features" / "kp", dst / "kp")
            shutil.copy(src / "crop_windows.json", dst / "crop_windows.json")
            frames = sorted(int(p.stem) for p in (dst / "mask").glob("*.png"))
            entries.append(SequenceEntry(
                track_id=tid, category=cat, frames=frames,
                mask_dir=f"sequences/{tid}/mask", kp_dir=f"sequences/{tid}/kp",
                crop_windows=f"sequences/{tid}/crop_windows.json"))

    manifest = BenchmarkManifest(
        skeleton=skeleton or DEFAULT_SKELETON,
        categories=sorted(by_cat), crop_size=crop_size, sequences=entries,
        root=out_dir)
    missing = manifest_missing_files(manifest)
    if missing:
        raise FileNotFoundError(f"export aborted, missing files: {missing[:5]}"
                                f"{' ...' if len(missing) > 5 else ''}")
    write_manifest(manifest, out_dir / "manifest.json")
    return manifest
