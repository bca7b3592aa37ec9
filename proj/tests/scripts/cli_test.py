#!/usr/bin/env python3
"""End-to-end checks of the advdiff command line tool.

usage: cli_test.py PATH_TO_ADVDIFF
"""
import csv
import math
import statistics
import subprocess
import sys
import tempfile
from collections import defaultdict
from pathlib import Path

SMALL = """\
# small sweep used by the CLI tests
K = 3
N = 4
d = 6
epsilon = 0, 0.2
iters = 10, 40
topology = complete, starlike
trials = 3
holdout = 400
"""


def run(binary, *args, expect_ok=True):
    proc = subprocess.run([binary, *args], capture_output=True, text=True)
    if expect_ok and proc.returncode != 0:
        raise AssertionError(f"{args} exited {proc.returncode}: {proc.stderr}")
    return proc


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def check(cond, message):
    if not cond:
        raise AssertionError(message)
    print(f"ok   {message}")


def main():
    binary = sys.argv[1]
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        config = tmp / "small.cfg"
        config.write_text(SMALL)

        run(binary, "--config", str(config), "--out", str(tmp / "a"))
        run(binary, "--config", str(config), "--out", str(tmp / "b"), "--threads", "2")
        rows_a = (tmp / "a" / "rows.csv").read_bytes()
        check(rows_a == (tmp / "b" / "rows.csv").read_bytes(), "rows.csv is byte-identical across runs")

        rows = read_csv(tmp / "a" / "rows.csv")
        check(len(rows) == 2 * 2 * 2 * 3 * 3, "row count is topologies x eps x T x trials x K")
        check(all(float(r["bound"]) >= 0 for r in rows), "every bound is nonnegative")
        check(all(r["eta_hat"] == "" for r in rows), "stability columns empty when stability is off")

        cells = defaultdict(list)
        for r in rows:
            cells[(r["topology"], r["epsilon"], r["T"])].append(float(r["gap"]))
        summary = read_csv(tmp / "a" / "summary.csv")
        check(len(summary) == len(cells), "one summary row per cell")
        agrees = all(
            math.isclose(float(s["gap_mean"]), statistics.fmean(gaps), rel_tol=1e-12, abs_tol=1e-15)
            and math.isclose(float(s["gap_std"]), statistics.stdev(gaps), rel_tol=1e-9, abs_tol=1e-15)
            for s in summary
            for gaps in [cells[(s["topology"], s["epsilon"], s["T"])]]
        )
        check(agrees, "summary.csv recomputes from rows.csv")

        constants = read_csv(tmp / "a" / "constants.csv")
        check(len(constants) == 2 * 2 * 2 * 3, "one constants row per (cell, trial)")

        run(binary, "--config", str(config), "--out", str(tmp / "c"), "--stability", "on", "--iters", "10")
        stab = read_csv(tmp / "c" / "rows.csv")
        check(all(r["eta_hat"] != "" and float(r["eta_hat"]) >= 0 for r in stab), "stability on fills eta_hat")

        bad = run(binary, "--config", str(config), "--trials", "0", "--out", str(tmp / "d"), expect_ok=False)
        check(bad.returncode != 0 and "trials" in bad.stderr, "trials = 0 is rejected")
        unknown = tmp / "unknown.cfg"
        unknown.write_text(SMALL + "learning_rate = 0.1\n")
        bad = run(binary, "--config", str(unknown), "--out", str(tmp / "e"), expect_ok=False)
        check(bad.returncode != 0 and "learning_rate" in bad.stderr, "unknown config key is rejected")
        two = tmp / "two.cfg"
        two.write_text(SMALL.replace("K = 3", "K = 2"))
        bad = run(binary, "--config", str(two), "--topology", "ring", "--out", str(tmp / "f"), expect_ok=False)
        check(bad.returncode != 0 and "K >= 3" in bad.stderr, "ring with K = 2 is rejected")
        check(not any((tmp / x).exists() for x in "def"), "rejected configs write no output")

        run(binary, "--config", str(config), "dataset", "--trial", "1", "--file", str(tmp / "data.csv"))
        data = read_csv(tmp / "data.csv")
        check(len(data) == 3 * 4 and len(data[0]) == 3 + 6, "dataset export has K*N rows and d features")

        run(binary, "--config", str(config), "trace", "--trial", "0", "--file", str(tmp / "trace.csv"))
        trace = read_csv(tmp / "trace.csv")
        check(len(trace) == 40 * 3, "trace has T*K rows")
        check(list(trace[0].keys()) == ["iteration", "agent", "iterate_norm", "sample"], "trace header")

    print("all CLI checks passed")


if __name__ == "__main__":
    main()
