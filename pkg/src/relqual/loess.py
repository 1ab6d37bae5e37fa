"""Tricube-weighted local linear smoothing."""

from __future__ import annotations

import math

import numpy as np


def loess(x: np.ndarray, y: np.ndarray, x_eval: np.ndarray | None = None,
          span: float = 0.3) -> np.ndarray:
    """Smooth y over x, evaluated at ``x_eval`` (default: the sample points).

    At each evaluation point the nearest ``ceil(span * n)`` samples get
    tricube weights and a weighted straight line is fitted; on exactly
    linear input the fit reproduces the line regardless of the weights.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be equal-length vectors")
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    if not 0 < span <= 1:
        raise ValueError("span must be in (0, 1]")
    if x_eval is None:
        x_eval = x
    x_eval = np.asarray(x_eval, dtype=float)

    r = max(2, math.ceil(span * n))
    out = np.empty(x_eval.shape[0])
    for i, x0 in enumerate(x_eval):
        d = np.abs(x - x0)
        h = np.partition(d, r - 1)[r - 1]
        if h <= 0:
            out[i] = y[d == 0].mean()
            continue
        w = np.clip(d / h, 0.0, 1.0)
        w = (1.0 - w ** 3) ** 3
        sw = w.sum()
        xm = (w @ x) / sw
        ym = (w @ y) / sw
        sxx = w @ ((x - xm) ** 2)
        if sxx <= 0:
            out[i] = ym
            continue
        slope = (w @ ((x - xm) * (y - ym))) / sxx
        out[i] = ym + slope * (x0 - xm)
    return out
