"""File formats: detection/embedding CSVs, track CSVs, tracklet sidecars,
ground-truth JSON, and the results JSON.

All files are UTF-8 with LF line endings, '.' decimal separator, and floats
serialized with 9 significant digits; parse(serialize(x)) is the identity on
canonical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .association import Cluster, mean_embedding
from .geometry import BoundingBox, Detection
from .refine import CountReport
from .sim import GroundTruth
from .tracker import Tracklet


class FormatError(ValueError):
    """Malformed or inconsistent input file."""


def fmt9(v: float) -> str:
    return format(float(v), ".9g")


def round9(v: float) -> float:
    return float(fmt9(v))


DETECTION_HEADER = "frame,det_id,x,y,w,h,confidence,class_id"
TRACK_HEADER = "frame,track_id,x,y,w,h,confidence"


@dataclass(frozen=True)
class DetectionRecord:
    frame: int
    det_id: int
    box: BoundingBox
    confidence: float
    class_id: int


def detections_to_records(dets: Sequence[Detection]) -> list[DetectionRecord]:
    """Assign per-frame det_ids by position; input must be frame-sorted."""
    records = []
    counters: dict[int, int] = {}
    for d in dets:
        det_id = counters.get(d.frame, 0)
        counters[d.frame] = det_id + 1
        records.append(DetectionRecord(d.frame, det_id, d.box, d.confidence, d.class_id))
    return records


def write_detections(path: str | Path, records: Iterable[DetectionRecord]) -> None:
    lines = [DETECTION_HEADER]
    for r in records:
        lines.append(
            f"{r.frame},{r.det_id},{fmt9(r.box.x)},{fmt9(r.box.y)},"
            f"{fmt9(r.box.w)},{fmt9(r.box.h)},{fmt9(r.confidence)},{r.class_id}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_detections(path: str | Path) -> list[DetectionRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != DETECTION_HEADER:
        raise FormatError(f"{path}:1: expected header '{DETECTION_HEADER}'")
    records: list[DetectionRecord] = []
    seen: set[tuple[int, int]] = set()
    last_frame = None
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 8:
            raise FormatError(f"{path}:{n}: expected 8 fields, got {len(parts)}")
        try:
            frame, det_id = int(parts[0]), int(parts[1])
            x, y, w, h, conf = (float(p) for p in parts[2:7])
            class_id = int(parts[7])
        except ValueError as exc:
            raise FormatError(f"{path}:{n}: {exc}") from exc
        if not 0.0 <= conf <= 1.0:
            raise FormatError(f"{path}:{n}: confidence {conf} outside [0, 1]")
        if w <= 0 or h <= 0:
            raise FormatError(f"{path}:{n}: non-positive box size {w}x{h}")
        if last_frame is not None and frame < last_frame:
            raise FormatError(f"{path}:{n}: frames must be sorted ascending")
        if (frame, det_id) in seen:
            raise FormatError(f"{path}:{n}: duplicate key (frame={frame}, det_id={det_id})")
        seen.add((frame, det_id))
        last_frame = frame
        records.append(DetectionRecord(frame, det_id, BoundingBox(x, y, w, h), conf, class_id))
    return records


def write_embeddings(
    path: str | Path, keyed: Sequence[tuple[int, int, np.ndarray]], dim: int
) -> None:
    header = "frame,det_id," + ",".join(f"e{i}" for i in range(dim))
    lines = [header]
    for frame, det_id, vec in keyed:
        if len(vec) != dim:
            raise FormatError(f"embedding for (frame={frame}, det_id={det_id}) has length "
                              f"{len(vec)}, expected {dim}")
        lines.append(f"{frame},{det_id}," + ",".join(fmt9(v) for v in vec))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_embeddings(path: str | Path) -> dict[tuple[int, int], np.ndarray]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("frame,det_id,"):
        raise FormatError(f"{path}:1: expected header 'frame,det_id,e0,...'")
    cols = lines[0].split(",")[2:]
    if cols != [f"e{i}" for i in range(len(cols))] or not cols:
        raise FormatError(f"{path}:1: embedding columns must be e0..e{{D-1}}")
    dim = len(cols)
    out: dict[tuple[int, int], np.ndarray] = {}
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != dim + 2:
            raise FormatError(f"{path}:{n}: expected {dim + 2} fields, got {len(parts)}")
        try:
            key = (int(parts[0]), int(parts[1]))
            vec = np.array(parts[2:], dtype=float)
        except ValueError as exc:
            raise FormatError(f"{path}:{n}: {exc}") from exc
        if key in out:
            raise FormatError(f"{path}:{n}: duplicate key (frame={key[0]}, det_id={key[1]})")
        out[key] = vec
    return out


def merge_embeddings(
    records: Sequence[DetectionRecord],
    embeddings: Optional[Mapping[tuple[int, int], np.ndarray]],
) -> list[Detection]:
    """Join detection records with their embeddings; key sets must match."""
    if embeddings is not None:
        rec_keys = {(r.frame, r.det_id) for r in records}
        missing = sorted(rec_keys - set(embeddings))
        extra = sorted(set(embeddings) - rec_keys)
        if missing:
            raise FormatError(
                f"detection (frame={missing[0][0]}, det_id={missing[0][1]}) has no embedding"
            )
        if extra:
            raise FormatError(
                f"embedding key (frame={extra[0][0]}, det_id={extra[0][1]}) matches no detection"
            )
    return [
        Detection(
            frame=r.frame,
            box=r.box,
            confidence=r.confidence,
            class_id=r.class_id,
            embedding=None if embeddings is None else embeddings[(r.frame, r.det_id)],
        )
        for r in records
    ]


# ----------------------------------------------------------------------
# Track CSV and tracklet sidecar


def write_tracks_csv(path: str | Path, tracklets: Sequence[Tracklet]) -> None:
    """Per-frame rows of confirmed tracks, sorted by (frame, track_id)."""
    rows = []
    for t in tracklets:
        for f, b, c in zip(t.frames, t.boxes, t.confidences):
            rows.append((f, t.track_id, b, c))
    rows.sort(key=lambda r: (r[0], r[1]))
    lines = [TRACK_HEADER]
    for f, tid, b, c in rows:
        lines.append(f"{f},{tid},{fmt9(b.x)},{fmt9(b.y)},{fmt9(b.w)},{fmt9(b.h)},{fmt9(c)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def tracklet_sidecar_path(track_csv_path: str | Path) -> Path:
    p = Path(track_csv_path)
    return p.with_name(p.stem + ".tracklets.json")


def write_tracklets_json(path: str | Path, camera_id: int, tracklets: Sequence[Tracklet]) -> None:
    doc = {
        "camera_id": camera_id,
        "tracklets": [
            {
                "track_id": t.track_id,
                "frames": list(t.frames),
                "boxes": [[round9(b.x), round9(b.y), round9(b.w), round9(b.h)] for b in t.boxes],
                "confidences": [round9(c) for c in t.confidences],
                "mean_confidence": round9(t.mean_confidence),
                "mean_embedding": (
                    [round9(v) for v in mean_embedding(t)]
                    if (t.embeddings or t.pooled_embedding is not None)
                    else None
                ),
            }
            for t in tracklets
        ],
    }
    _write_json(path, doc)


def read_tracklets_json(path: str | Path) -> tuple[int, list[Tracklet]]:
    doc = _read_json(path)
    try:
        camera_id = int(doc["camera_id"])
        tracklets = []
        for td in doc["tracklets"]:
            pooled = td.get("mean_embedding")
            tracklets.append(
                Tracklet(
                    camera_id=camera_id,
                    track_id=int(td["track_id"]),
                    frames=[int(f) for f in td["frames"]],
                    boxes=[BoundingBox(*map(float, b)) for b in td["boxes"]],
                    confidences=[float(c) for c in td["confidences"]],
                    embeddings=[],
                    pooled_embedding=None if pooled is None else np.array(pooled, dtype=float),
                )
            )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed tracklet file ({exc})") from exc
    return camera_id, tracklets


# ----------------------------------------------------------------------
# Ground-truth JSON


def write_truth_json(path: str | Path, truth: GroundTruth) -> None:
    doc = {
        "identity_count": truth.identity_count,
        "embeddings": [[round9(v) for v in row] for row in truth.embeddings],
        "cameras": {
            str(cam): {
                str(f): [
                    [identity, round9(b.x), round9(b.y), round9(b.w), round9(b.h)]
                    for identity, b in entries
                ]
                for f, entries in enumerate(frames)
            }
            for cam, frames in sorted(truth.boxes.items())
        },
    }
    _write_json(path, doc)


@dataclass(eq=False)
class TruthFile:
    identity_count: int
    embeddings: Optional[np.ndarray]
    cameras: dict[int, dict[int, list[tuple[int, BoundingBox]]]]


def read_truth_json(path: str | Path) -> TruthFile:
    doc = _read_json(path)
    try:
        cameras = {
            int(cam): {
                int(f): [
                    (int(e[0]), BoundingBox(float(e[1]), float(e[2]), float(e[3]), float(e[4])))
                    for e in entries
                ]
                for f, entries in frames.items()
            }
            for cam, frames in doc["cameras"].items()
        }
        embeddings = doc.get("embeddings")
        return TruthFile(
            identity_count=int(doc["identity_count"]),
            embeddings=None if embeddings is None else np.array(embeddings, dtype=float),
            cameras=cameras,
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise FormatError(f"{path}: malformed truth file ({exc})") from exc


# ----------------------------------------------------------------------
# Results JSON


def results_doc(
    camera_tracklets: Mapping[int, Sequence[Tracklet]],
    clusters: Sequence[Cluster],
    method_counts: Optional[Mapping[str, int]],
    frames_processed: int,
    count_report: Optional[CountReport] = None,
) -> dict:
    doc = {
        "cameras": [
            {
                "camera_id": cam,
                "tracklets": [
                    {
                        "track_id": t.track_id,
                        "frames": list(t.frames),
                        "boxes": [
                            [round9(b.x), round9(b.y), round9(b.w), round9(b.h)] for b in t.boxes
                        ],
                        "confidences": [round9(c) for c in t.confidences],
                    }
                    for t in camera_tracklets[cam]
                ],
            }
            for cam in sorted(camera_tracklets)
        ],
        "clusters": [
            {"global_id": c.global_id, "members": [[cam, tid] for cam, tid in c.members]}
            for c in clusters
        ],
        "unique_count": len(clusters),
        "method_counts": dict(method_counts) if method_counts else None,
        "count_report": None if count_report is None else count_report_doc(count_report),
        "timing": {"frames_processed": frames_processed, "cameras": len(camera_tracklets)},
    }
    return doc


def count_report_doc(report: CountReport) -> dict:
    return {
        "per_set_predicted": list(report.per_set_predicted),
        "per_set_truth": list(report.per_set_truth),
        "l2_error": round9(report.l2_error),
        "tp": report.tp,
        "fp": report.fp,
        "fn": report.fn,
        "accuracy": None if report.accuracy is None else round9(report.accuracy),
        "recall": None if report.recall is None else round9(report.recall),
        "f1": None if report.f1 is None else round9(report.f1),
    }


def write_results_json(path: str | Path, doc: dict) -> None:
    if doc["unique_count"] != len(doc["clusters"]):
        raise ValueError("unique_count must equal the number of clusters listed")
    _write_json(path, doc)


@dataclass(eq=False)
class ResultsFile:
    camera_tracklets: dict[int, list[Tracklet]]
    clusters: list[Cluster]
    unique_count: int
    method_counts: Optional[dict[str, int]]


def read_results_json(path: str | Path) -> ResultsFile:
    doc = _read_json(path)
    try:
        camera_tracklets: dict[int, list[Tracklet]] = {}
        for cam_doc in doc["cameras"]:
            cam = int(cam_doc["camera_id"])
            camera_tracklets[cam] = [
                Tracklet(
                    camera_id=cam,
                    track_id=int(td["track_id"]),
                    frames=[int(f) for f in td["frames"]],
                    boxes=[BoundingBox(*map(float, b)) for b in td["boxes"]],
                    confidences=[float(c) for c in td["confidences"]],
                    embeddings=[],
                )
                for td in cam_doc["tracklets"]
            ]
        clusters = [
            Cluster(
                global_id=int(cd["global_id"]),
                members=[(int(m[0]), int(m[1])) for m in cd["members"]],
            )
            for cd in doc["clusters"]
        ]
        unique_count = int(doc["unique_count"])
    except (KeyError, TypeError, IndexError) as exc:
        raise FormatError(f"{path}: malformed results file ({exc})") from exc
    if unique_count != len(clusters):
        raise FormatError(f"{path}: unique_count {unique_count} != {len(clusters)} clusters")
    return ResultsFile(
        camera_tracklets=camera_tracklets,
        clusters=clusters,
        unique_count=unique_count,
        method_counts=doc.get("method_counts"),
    )


def _write_json(path: str | Path, doc: dict) -> None:
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n"
    )


def _read_json(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
