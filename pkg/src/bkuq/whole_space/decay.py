"""Power-law fits of norm histories."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FitError(ValueError):
    pass


@dataclass
class DecayFit:
    times: np.ndarray
    norms: np.ndarray
    p: float
    C: float
    residual: float
    window: tuple
    log_corrected: bool = False
    corrected_first_max: float = float("nan")
    corrected_second_max: float = float("nan")
    bounded: bool | None = None

    @property
    def growth_ratio(self):
        return self.corrected_second_max / self.corrected_first_max


def decay_fit(times, norms, window=(20.0, 300.0), log_corrected=False, k=2, p0=0.75,
              min_samples=10):
    """Fit norm ~ C (1+t)^p over the window by least squares in log-log.

    With ``log_corrected`` also track q(t) = norm (1+t)^{p0} / ln(1+t)^{k-1}
    and compare its maximum over the first and second half of the window.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    if window[0] >= window[1]:
        raise FitError(f"degenerate fit window {window}")
    sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < min_samples:
        raise FitError(f"only {sel.sum()} samples inside window {window}; need {min_samples}")
    ts, ys = t[sel], y[sel]
    if np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        raise FitError("norms must be positive and finite inside the fit window")
    X = np.log1p(ts)
    p, c = np.polyfit(X, np.log(ys), 1)
    res = float(np.sqrt(np.mean((np.log(ys) - (p * X + c)) ** 2)))
    fit = DecayFit(ts, ys, float(p), float(np.exp(c)), res, tuple(window), log_corrected)
    if log_corrected:
        q = ys * (1 + ts) ** p0 / np.log1p(ts) ** (k - 1)
        half = len(q) // 2
        fit.corrected_first_max = float(q[:half].max())
        fit.corrected_second_max = float(q[half:].max())
        fit.bounded = bool(fit.corrected_second_max <= 1.2 * fit.corrected_first_max)
    return fit
