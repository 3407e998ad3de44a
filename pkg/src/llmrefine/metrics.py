"""Evaluation metrics: character-level span P/R/F1, correlation, correction rate."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .search import Termination, Trajectory

Range = tuple[int, int]


class UndefinedCorrelationError(ValueError):
    pass


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "tp": self.tp, "fp": self.fp, "fn": self.fn}


def _labels(ranges: Iterable[Range], length: int) -> np.ndarray:
    mask = np.zeros(length, dtype=bool)
    for start, end in ranges:
        if not 0 <= start <= end <= length:
            raise ValueError(f"span {(start, end)} outside text of length {length}")
        mask[start:end] = True
    return mask


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def prf_from_counts(tp: int, fp: int, fn: int) -> PRF:
    p = _ratio(tp, tp + fp)
    r = _ratio(tp, tp + fn)
    f = 2 * p * r / (p + r) if p + r else 0.0
    return PRF(p, r, f, tp, fp, fn)


def char_counts(predicted: Sequence[Range], gold: Sequence[Range], text_length: int) -> tuple[int, int, int]:
    pred = _labels(predicted, text_length)
    ref = _labels(gold, text_length)
    return int(np.sum(pred & ref)), int(np.sum(pred & ~ref)), int(np.sum(~pred & ref))


def char_prf(predicted: Sequence[Range], gold: Sequence[Range], text_length: int) -> PRF:
    """Per-character error-tagging P/R/F1 for one segment; empty denominators give 0."""
    return prf_from_counts(*char_counts(predicted, gold, text_length))


def char_prf_corpus(segments: Iterable[tuple[Sequence[Range], Sequence[Range], int]]) -> PRF:
    """Micro-average: pool character counts over ``(predicted, gold, length)`` segments."""
    tp = fp = fn = 0
    for predicted, gold, length in segments:
        a, b, c = char_counts(predicted, gold, length)
        tp, fp, fn = tp + a, fp + b, fn + c
    return prf_from_counts(tp, fp, fn)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("pearson needs two equal-length sequences of at least 2 values")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("correlation undefined for a constant sequence")
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


def pairwise_accuracy(system_scores: Sequence[float], human_scores: Sequence[float]) -> float:
    """Share of item pairs ordered the same way by both score lists.

    No tie calibration: a pair agrees when both differences have the same
    sign, which for ties means both lists tie.
    """
    s = np.asarray(system_scores, dtype=float)
    h = np.asarray(human_scores, dtype=float)
    if s.shape != h.shape or s.ndim != 1 or len(s) < 2:
        raise ValueError("pairwise_accuracy needs two equal-length sequences of at least 2 values")
    i, j = np.triu_indices(len(s), k=1)
    agree = np.sign(s[i] - s[j]) == np.sign(h[i] - h[j])
    return float(agree.mean())


def correction_rate(trajectories: Sequence[Trajectory], within: Optional[int] = None) -> float:
    """Fraction of runs that ended error-free (optionally within ``within`` refinements)."""
    if not trajectories:
        return 0.0
    if within is None:
        hits = sum(t.termination is Termination.ERROR_FREE for t in trajectories)
    else:
        hits = sum(t.corrected_by(within) for t in trajectories)
    return hits / len(trajectories)


def load_span_records(text: str, key: str) -> list[tuple[str, list[Range]]]:
    """Read ``{text, <key>|spans}`` JSONL records into ``(text, ranges)`` pairs."""
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        spans = rec.get(key, rec.get("spans", []))
        out.append((rec["text"], [tuple(s) for s in spans]))
    return out
