"""Run records, per-episode summaries and their CSV files."""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger(__name__)

RAW_HEADER = ["experiment", "agent", "seed", "episode", "steps", "return", "ms"]
SUMMARY_HEADER = ["episode", "mean", "stderr", "n"]


@dataclass(frozen=True)
class RunRecord:
    experiment: str
    agent: str
    seed: int
    episode: int
    steps: int
    return_: float
    ms: float = 0.0


@dataclass(frozen=True)
class SummaryRow:
    episode: int
    mean: float
    stderr: float
    n: int


def summarize(records, metric: str = "return") -> list:
    """Mean and standard error across seeds at each episode.

    ``metric`` is ``"return"`` or ``"steps"``. Every seed must cover the same
    episodes. With a single seed the standard error is reported as 0.
    """
    attr = {"return": "return_", "steps": "steps"}[metric]
    by_seed = defaultdict(dict)
    for r in records:
        if r.episode in by_seed[r.seed]:
            raise ValueError(f"duplicate record for seed {r.seed}, episode {r.episode}")
        value = float(getattr(r, attr))
        if math.isnan(value):
            raise ValueError(f"NaN {metric} for seed {r.seed}, episode {r.episode}")
        by_seed[r.seed][r.episode] = value
    if not by_seed:
        return []
    grids = {tuple(sorted(eps)) for eps in by_seed.values()}
    if len(grids) != 1:
        raise ValueError("seeds cover different episode grids; cannot summarize ragged records")
    n = len(by_seed)
    if n == 1:
        log.warning("summarizing a single seed: standard errors are reported as 0")
    rows = []
    for ep in grids.pop():
        vals = [by_seed[s][ep] for s in sorted(by_seed)]
        mean = math.fsum(vals) / n
        if n > 1:
            var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
            se = math.sqrt(var) / math.sqrt(n)
        else:
            se = 0.0
        rows.append(SummaryRow(ep, mean, se, n))
    return rows


def _open(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_csv(records, path) -> None:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RAW_HEADER)
        for r in records:
            w.writerow([r.experiment, r.agent, r.seed, r.episode, r.steps, repr(float(r.return_)), repr(float(r.ms))])


def write_summary_csv(rows, path) -> None:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in rows:
            w.writerow([r.episode, repr(float(r.mean)), repr(float(r.stderr)), r.n])


def read_csv(path) -> list:
    path = Path(path)
    try:
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != RAW_HEADER:
                raise ValueError(f"{path}: unexpected header {header}")
            return [
                RunRecord(row[0], row[1], int(row[2]), int(row[3]), int(row[4]), float(row[5]), float(row[6]))
                for row in reader
            ]
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc


def read_summary_csv(path) -> list:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SUMMARY_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [SummaryRow(int(r[0]), float(r[1]), float(r[2]), int(r[3])) for r in reader]
