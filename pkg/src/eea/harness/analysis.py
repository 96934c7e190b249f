"""Reading learning curves: per-seed series, crossings and thresholds."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .records import RunRecord, summarize


def per_seed(records: list, metric: str = "return") -> np.ndarray:
    """``[seeds, episodes]`` array of one metric, rows in seed order."""
    attr = "return_" if metric == "return" else metric
    seeds = sorted({r.seed for r in records})
    episodes = sorted({r.episode for r in records})
    grid = np.full((len(seeds), len(episodes)), np.nan)
    si = {s: i for i, s in enumerate(seeds)}
    ei = {e: i for i, e in enumerate(episodes)}
    for r in records:
        grid[si[r.seed], ei[r.episode]] = getattr(r, attr)
    if np.isnan(grid).any():
        raise ValueError("records do not cover a full seed-by-episode grid")
    return grid


def first_at_least(values, threshold: float) -> Optional[int]:
    """1-based index of the first value ``>= threshold``."""
    hits = np.flatnonzero(np.asarray(values) >= threshold)
    return int(hits[0]) + 1 if hits.size else None


def first_at_most(values, threshold: float) -> Optional[int]:
    hits = np.flatnonzero(np.asarray(values) <= threshold)
    return int(hits[0]) + 1 if hits.size else None


def mean_curve(records: list, metric: str = "return") -> np.ndarray:
    return np.array([row.mean for row in summarize(records, metric)])


def trailing_mean(values, window: int) -> np.ndarray:
    """Mean of the last ``window`` values at each index (fewer at the start)."""
    v = np.asarray(values, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(1, len(v) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def episodes_to_threshold(steps, threshold: float, window: int = 5) -> int:
    """First episode whose trailing ``window`` mean length is at most
    ``threshold``; runs that never get there count as one past the budget."""
    v = np.asarray(steps, dtype=float)
    hit = first_at_most(trailing_mean(v, window)[window - 1:], threshold)
    return len(v) + 1 if hit is None else hit + window - 1


def window_means(grid: np.ndarray, start: int, stop: int):
    """Per-seed mean over episodes ``start..stop`` (1-based, inclusive), then
    the across-seed mean and standard error of those means."""
    w = grid[:, start - 1 : stop].mean(axis=1)
    se = w.std(ddof=1) / np.sqrt(len(w)) if len(w) > 1 else 0.0
    return float(w.mean()), float(se)


def records_from(experiment: str, agent: str, grid) -> list:
    """Inverse of ``per_seed`` for synthetic tests."""
    return [
        RunRecord(experiment, agent, s, e + 1, 0, float(v))
        for s, row in enumerate(np.asarray(grid))
        for e, v in enumerate(row)
    ]
