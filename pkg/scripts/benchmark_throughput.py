#!/usr/bin/env python3
"""Measure full-pipeline throughput, sequential vs. one process per camera.

Example:
    python scripts/benchmark_throughput.py --identities 30 --frames 300
"""

import argparse
import os
import time

from mcmot.association import AssociationConfig
from mcmot.config import PipelineConfig
from mcmot.pipeline import run_pipeline
from mcmot.sim import ScenarioConfig, generate
from mcmot.tracker import TrackerConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cameras", type=int, default=3)
    ap.add_argument("--identities", type=int, default=30)
    ap.add_argument("--frames", type=int, default=300)
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--nn-budget", type=int, default=25)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    cfg = ScenarioConfig(
        seed=0,
        cameras=args.cameras,
        identities=args.identities,
        frames=args.frames,
        embedding_dim=args.dim,
    )
    _, streams = generate(cfg)
    pc = PipelineConfig(
        tracker=TrackerConfig(nn_budget=args.nn_budget),
        association=AssociationConfig(threshold=0.5),
    )
    print(f"{args.cameras} cameras x {args.frames} frames, "
          f"{args.identities} detections/frame, {os.cpu_count()} cores")

    run_pipeline({0: streams[0]}, pc, total_frames=args.frames)  # warmup
    for parallel in (False, True):
        best = None
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            res = run_pipeline(streams, pc, total_frames=args.frames, parallel=parallel)
            dt = time.perf_counter() - t0
            best = dt if best is None else min(best, dt)
        label = "parallel  " if parallel else "sequential"
        print(f"{label}: {res.frames_processed} frames in {best:.3f}s "
              f"({res.frames_processed / best:.0f} fps), unique={res.unique_count}")


if __name__ == "__main__":
    main()
