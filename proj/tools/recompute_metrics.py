#!/usr/bin/env python3
"""Recompute the summary metrics of a run directory from its per-task log.

Reads log.csv and metrics.csv, rebuilds every derived column from the log rows
alone (accumulating in row order) and requires the printed values to match
metrics.csv byte for byte. Exits 0 on a match, 1 otherwise.
"""

import argparse
import csv
import pathlib
import sys


def fmt(x: float) -> str:
    return "%.17g" % x


def recompute(log_rows, slots: int, slot_ms: float) -> dict:
    tasks = 0
    successes = 0
    accuracy = 0.0
    reward_total = 0.0
    seen_slot = None
    last_loss = ""
    for row in log_rows:
        tasks += 1
        if row["success"] == "1":
            successes += 1
            accuracy += float(row["accuracy"])
        if row["slot"] != seen_slot:
            seen_slot = row["slot"]
            reward_total += float(row["slot_reward"])
            if row["loss"]:
                last_loss = row["loss"]
    horizon = float(slots) * slot_ms
    return {
        "tasks": str(tasks),
        "successes": str(successes),
        "ssp": fmt(successes / tasks if tasks else 0.0),
        "avg_accuracy": fmt(accuracy / tasks if tasks else 0.0),
        "avg_throughput": fmt(successes / horizon if horizon > 0 else 0.0),
        "mean_reward": fmt(reward_total / slots if slots else 0.0),
        "final_loss": last_loss,
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("run_dir", type=pathlib.Path)
    args = parser.parse_args()

    with open(args.run_dir / "log.csv", newline="") as f:
        log_rows = list(csv.DictReader(f))
    with open(args.run_dir / "metrics.csv", newline="") as f:
        metrics = list(csv.DictReader(f))
    if len(metrics) != 1:
        print(f"expected one metrics row, found {len(metrics)}")
        return 1
    reported = metrics[0]

    ours = recompute(log_rows, int(reported["slots"]), float(reported["slot_ms"]))
    mismatches = 0
    for key, value in ours.items():
        status = "ok" if reported[key] == value else "MISMATCH"
        mismatches += status != "ok"
        print(f"{key:15s} reported {reported[key]:>24s} recomputed {value:>24s} {status}")
    return 1 if mismatches else 0


if __name__ == "__main__":
    sys.exit(main())
