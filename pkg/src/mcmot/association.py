"""Two-stage tracklet association across cameras: greedy L2 clustering of
pooled appearance embeddings, with an optional majority-voting merge pass."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .tracker import Tracklet

METHODS = ("euclidean", "voting", "euclidean_voting")


@dataclass(frozen=True)
class AssociationConfig:
    """Tracklet association settings.

    method: "euclidean" (greedy centroid clustering), "voting" (singleton
    clusters merged by majority voting), or "euclidean_voting" (greedy
    clustering followed by the voting merge pass). threshold is the L2
    distance cutoff; intra_first merges fragmented tracklets within each
    camera before the cross-camera pass.
    """

    method: str = "euclidean"
    threshold: float = 0.5
    intra_first: bool = True

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.threshold <= 0:
            raise ValueError("threshold must be > 0")


@dataclass(eq=False)
class Cluster:
    """A set of tracklets judged to be one person across cameras.

    member_embeddings holds one pooled (per-tracklet mean) embedding per
    member; the centroid is their arithmetic mean.
    """

    global_id: int
    members: list[tuple[int, int]] = field(default_factory=list)
    member_embeddings: list[np.ndarray] = field(default_factory=list)
    centroid: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def recompute_centroid(self) -> None:
        self.centroid = np.mean(np.asarray(self.member_embeddings), axis=0)

    def absorb(self, other: "Cluster") -> None:
        self.members.extend(other.members)
        self.member_embeddings.extend(other.member_embeddings)
        self.recompute_centroid()


def mean_embedding(t: Tracklet) -> np.ndarray:
    """Arithmetic mean of a tracklet's embedding sequence."""
    if t.embeddings:
        return np.mean(np.asarray(t.embeddings), axis=0)
    if t.pooled_embedding is not None:
        return np.asarray(t.pooled_embedding, dtype=float)
    raise ValueError(
        f"tracklet (camera {t.camera_id}, track {t.track_id}) has no embeddings; "
        "association requires embedding input"
    )


def _singleton(t: Tracklet, global_id: int) -> Cluster:
    e = mean_embedding(t)
    return Cluster(
        global_id=global_id,
        members=[(t.camera_id, t.track_id)],
        member_embeddings=[e],
        centroid=e.copy(),
    )


def _greedy_pass(units: list[Cluster], threshold: float) -> list[Cluster]:
    """Greedy agglomeration: each unit joins the nearest existing cluster by
    centroid distance if within threshold, else opens a new cluster."""
    clusters: list[Cluster] = []
    for unit in units:
        if clusters:
            dists = [float(np.linalg.norm(unit.centroid - c.centroid)) for c in clusters]
            best = int(np.argmin(dists))
            if dists[best] <= threshold:
                clusters[best].absorb(unit)
                continue
        clusters.append(
            Cluster(
                global_id=len(clusters) + 1,
                members=list(unit.members),
                member_embeddings=list(unit.member_embeddings),
                centroid=unit.centroid.copy(),
            )
        )
    return clusters


def euclidean_associate(tracklets: Sequence[Tracklet], threshold: float) -> list[Cluster]:
    """Greedy agglomerative clustering of tracklet mean embeddings.

    Tracklets are visited in (camera_id, track_id) order; centroids are
    recomputed after every assignment.
    """
    ordered = sorted(tracklets, key=lambda t: (t.camera_id, t.track_id))
    return _greedy_pass([_singleton(t, i + 1) for i, t in enumerate(ordered)], threshold)


def voting_merge(clusters: Sequence[Cluster], threshold: float) -> list[Cluster]:
    """Majority-voting merge to a deterministic fixpoint.

    A member embedding of A is inside B iff its L2 distance to B's centroid
    is <= threshold. While any ordered pair (A, B) has strictly more than
    half of A's member embeddings inside B, the first such pair in ascending
    (global_id_A, global_id_B) order is merged (A into B).
    """
    live = [copy.deepcopy(c) for c in clusters]
    while True:
        live.sort(key=lambda c: c.global_id)
        merged = False
        for a in live:
            for b in live:
                if a.global_id == b.global_id:
                    continue
                inside = sum(
                    1
                    for e in a.member_embeddings
                    if float(np.linalg.norm(e - b.centroid)) <= threshold
                )
                if 2 * inside > len(a.member_embeddings):
                    b.absorb(a)
                    live.remove(a)
                    merged = True
                    break
            if merged:
                break
        if not merged:
            return live


def _run_method(units: list[Cluster], method: str, threshold: float) -> list[Cluster]:
    if method == "euclidean":
        return _greedy_pass(units, threshold)
    if method == "voting":
        return voting_merge(units, threshold)
    if method == "euclidean_voting":
        return voting_merge(_greedy_pass(units, threshold), threshold)
    raise ValueError(f"method must be one of {METHODS}, got {method!r}")


def associate_multicamera(
    per_camera: Mapping[int, Sequence[Tracklet]], cfg: AssociationConfig
) -> list[Cluster]:
    """Cluster tracklets into global identities across cameras.

    With intra_first, the configured method first merges fragmented tracklets
    within each camera; the resulting per-camera clusters are then pooled and
    clustered across cameras. Global ids are assigned in ascending discovery
    order starting at 1.
    """
    units: list[Cluster] = []
    for camera_id in sorted(per_camera):
        tracklets = sorted(per_camera[camera_id], key=lambda t: (t.camera_id, t.track_id))
        singles = [_singleton(t, len(units) + i + 1) for i, t in enumerate(tracklets)]
        if cfg.intra_first:
            intra = _run_method(singles, cfg.method, cfg.threshold)
            for c in intra:
                c.global_id = len(units) + 1
                units.append(c)
        else:
            units.extend(singles)
    clusters = _run_method(units, cfg.method, cfg.threshold)
    clusters.sort(key=lambda c: c.global_id)
    for i, c in enumerate(clusters):
        c.global_id = i + 1
    return clusters


def count_unique(clusters: Sequence[Cluster]) -> int:
    """Number of distinct identities: one per cluster."""
    return len(clusters)
