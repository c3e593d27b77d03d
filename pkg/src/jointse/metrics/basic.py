from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from ..errors import EnergyError, MetricError, ParameterError


def snr_db(signal, residual) -> float:
    s = np.asarray(getattr(signal, "samples", signal), dtype=np.float64)
    r = np.asarray(getattr(residual, "samples", residual), dtype=np.float64)
    p_s = float(np.mean(s**2)) if s.size else 0.0
    p_r = float(np.mean(r**2)) if r.size else 0.0
    if p_s == 0.0 or p_r == 0.0:
        raise EnergyError("SNR needs non-zero signal and residual energy")
    return 10.0 * math.log10(p_s / p_r)


def aggregate(values: Iterable[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (n - 1); std is 0 for a single value.

    Single pass (Welford) so long columns do not lose precision.
    """
    n = 0
    mean = 0.0
    m2 = 0.0
    for v in values:
        v = float(v)
        n += 1
        delta = v - mean
        mean += delta / n
        m2 += delta * (v - mean)
    if n == 0:
        raise ParameterError("cannot aggregate an empty list")
    std = math.sqrt(m2 / (n - 1)) if n > 1 else 0.0
    return mean, std


def read_external_scores(path: str | Path) -> dict[str, float]:
    """Comma-separated ``utterance_id,score`` rows (header optional)."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            try:
                out[row[0].strip()] = float(row[1])
            except (IndexError, ValueError):
                if not out and row[0].strip().lower() in ("utterance_id", "id"):
                    continue
                raise MetricError(f"{path}: malformed row {row!r}")
    return out
