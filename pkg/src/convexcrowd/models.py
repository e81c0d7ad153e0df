"""Objective functions for the five crowdsourcing families.

Every family is defined through its per-response objective for an observed
answer of 1; an answer of 0 is handled by reflecting the answer parameter,
``L(x, w; 0) = L(1 - x, w; 1)``. The array kernels below take the already
reflected answer parameter and work on scalars or numpy arrays alike.

Families and their y=1 per-response objectives (natural log):

* ``dawid_skene``: ``-(x log((1+w)/2) + (1-x) log((1-w)/2))``
* ``additive_noise``: ``-log(1 - F(-(x - 1/2) w))`` with F logistic or Gaussian
* ``minimax_restricted``: ``-softmax`` of the exponents ``1/2 + w(2x-1)`` and
  ``1/2 - w(2x-1)``, i.e. ``-sigmoid(2w(2x-1))``
* ``glad_restricted``: ``x log(1+e^-w) + (1-x) log(1+e^w)``
* ``convex_pl``: ``max(-w - x - 1, w - 5x + 1)``
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit, log_ndtr, xlog1py

from .core import DomainError, ModelHandle, ResponseMatrix

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)
_LN2 = math.log(2.0)
_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ReducedEval:
    value: float
    grad_x: float
    grad_w: float
    branch: Optional[str] = None  # convex_pl only: "H0", "H1" or "tie"


# -- array kernels (n = 1, observed answer 1) ---------------------------------


def _values(m: ModelHandle, x, w):
    fam = m.family
    with np.errstate(divide="ignore", invalid="ignore"):
        if fam == "dawid_skene":
            # ln 2 pulled out so that w = 0 gives exactly ln 2 for every x
            return _LN2 - (xlog1py(x, w) + xlog1py(1 - x, -w))
        if fam == "additive_noise":
            t = (x - 0.5) * w
            if m.noise_cdf == "logistic":
                # 1 - F(-t) = F(t) for the symmetric logistic CDF
                return np.logaddexp(0.0, -t)
            return -log_ndtr(t)
        if fam == "minimax_restricted":
            s = expit(2 * w * (2 * x - 1))
            return s if m.minimax_raw else -s
        if fam == "glad_restricted":
            return x * np.logaddexp(0.0, -w) + (1 - x) * np.logaddexp(0.0, w)
        if fam == "convex_pl":
            x = np.asarray(x, dtype=float)
            w = np.asarray(w, dtype=float)
            return np.where(w <= 2 * x - 1, -w - x - 1, w - 5 * x + 1)
    raise AssertionError(fam)


def _grads(m: ModelHandle, x, w):
    fam = m.family
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if fam == "dawid_skene":
            gx = -(np.log1p(w) - np.log1p(-w))
            gw = -(x / (1 + w) - (1 - x) / (1 - w))
        elif fam == "additive_noise":
            t = (x - 0.5) * w
            if m.noise_cdf == "logistic":
                dt = -expit(-t)
            else:
                dt = -np.exp(-0.5 * t * t - _LOG_SQRT_2PI - log_ndtr(t))
            gx, gw = dt * w, dt * (x - 0.5)
        elif fam == "minimax_restricted":
            s = expit(2 * w * (2 * x - 1))
            ds = s * (1 - s) if m.minimax_raw else -s * (1 - s)
            gx, gw = ds * 4 * w, ds * 2 * (2 * x - 1)
        elif fam == "glad_restricted":
            # log(1+e^-w) - log(1+e^w) = -w
            gx = -w + 0 * x
            gw = expit(w) - x
        elif fam == "convex_pl":
            on_h0 = w < 2 * x - 1
            gx = np.where(on_h0, -1.0, -5.0)
            gw = np.where(on_h0, -1.0, 1.0)
        else:
            raise AssertionError(fam)
    return np.broadcast_to(gx, np.broadcast(x, w).shape), np.broadcast_to(gw, np.broadcast(x, w).shape)


def per_response_values(m: ModelHandle, x, w, y=1):
    """Vectorized n=1 objective; ``y`` may be an array of answers."""
    x = np.asarray(x, dtype=float)
    xe = np.where(np.asarray(y) == 1, x, 1 - x)
    return _values(m, xe, np.asarray(w, dtype=float))


# -- scalar kernels for tight per-cell loops ----------------------------------


def scalar_kernel(m: ModelHandle):
    """Return ``f(x, w) -> (value, d/dx, d/dw)`` for y = 1 and n = 1, in pure floats."""
    fam = m.family
    if fam == "dawid_skene":

        def f(x, w):
            lp, lm = math.log1p(w), math.log1p(-w)
            v = _LN2 - (x * lp + (1 - x) * lm)
            return v, -(lp - lm), -(x / (1 + w) - (1 - x) / (1 - w))

    elif fam == "additive_noise" and m.noise_cdf == "logistic":

        def f(x, w):
            t = (x - 0.5) * w
            dt = -1.0 / (1.0 + math.exp(t))
            return math.log1p(math.exp(-t)), dt * w, dt * (x - 0.5)

    elif fam == "additive_noise":

        def f(x, w):
            t = (x - 0.5) * w
            cdf = 0.5 * math.erfc(-t / _SQRT2)
            dt = -math.exp(-0.5 * t * t - _LOG_SQRT_2PI) / cdf
            return -math.log(cdf), dt * w, dt * (x - 0.5)

    elif fam == "minimax_restricted":
        sgn = 1.0 if m.minimax_raw else -1.0

        def f(x, w):
            s = 1.0 / (1.0 + math.exp(-2 * w * (2 * x - 1)))
            ds = sgn * s * (1 - s)
            return sgn * s, ds * 4 * w, ds * 2 * (2 * x - 1)

    elif fam == "glad_restricted":

        def f(x, w):
            a, b = math.log1p(math.exp(-w)), math.log1p(math.exp(w))
            return x * a + (1 - x) * b, -w, 1.0 / (1.0 + math.exp(-w)) - x

    else:

        def f(x, w):
            h0, h1 = -w - x - 1, w - 5 * x + 1
            if w < 2 * x - 1:
                return h0, -1.0, -1.0
            return h1, -5.0, 1.0

    return f


# -- convex_pl in correctly rounded arithmetic --------------------------------


def hyperplanes(x: float, w: float) -> tuple[float, float]:
    """(H0, H1) at (x, w), each rounded once from its exact value."""
    return math.fsum((-w, -x, -1.0)), math.fsum((w, -4 * x, -x, 1.0))


def _convex_pl_scalar(x: float, w: float) -> tuple[float, str]:
    # 2x - 1 is exact whenever it is >= 0, so this comparison is exact.
    edge = 2 * x - 1
    h0, h1 = hyperplanes(x, w)
    if w < edge:
        return h0, "H0"
    if w == edge:
        return h0, "tie"
    return h1, "H1"


# -- scalar API ---------------------------------------------------------------


def _check_point(m: ModelHandle, x, w, y=1) -> tuple[float, float]:
    if y not in (0, 1):
        raise DomainError(f"answer must be 0 or 1, got {y!r}")
    x, w = float(x), float(w)
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"x = {x!r} outside [0, 1]")
    if not (0.0 <= w <= m.w_max):
        raise DomainError(f"w = {w!r} outside [0, {m.w_max}]")
    return x, w


def reduced_objective(m: ModelHandle, x: float, w: float, y: int = 1) -> float:
    """Per-response objective scaled by ``m.n``."""
    x, w = _check_point(m, x, w, y)
    xe = x if y == 1 else 1 - x
    if m.family == "convex_pl":
        v = _convex_pl_scalar(xe, w)[0]
    else:
        v = float(_values(m, xe, w))
    if not math.isfinite(v):
        raise DomainError(f"{m.family} objective is infinite at x={x}, w={w}, y={y}")
    return m.n * v


def reduced_gradient(m: ModelHandle, x: float, w: float, y: int = 1) -> tuple[float, float]:
    """Analytic gradient (a subgradient for convex_pl, H1's on the tie line)."""
    x, w = _check_point(m, x, w, y)
    xe = x if y == 1 else 1 - x
    gx, gw = (float(g) for g in _grads(m, xe, w))
    if not (math.isfinite(gx) and math.isfinite(gw)):
        raise DomainError(f"{m.family} gradient undefined at x={x}, w={w}")
    if y == 0:
        gx = -gx
    return m.n * gx, m.n * gw


def evaluate(m: ModelHandle, x: float, w: float, y: int = 1) -> ReducedEval:
    value = reduced_objective(m, x, w, y)
    gx, gw = reduced_gradient(m, x, w, y)
    branch = None
    if m.family == "convex_pl":
        branch = _convex_pl_scalar(x if y == 1 else 1 - x, float(w))[1]
    return ReducedEval(value, gx, gw, branch)


def crossing_g(m: ModelHandle, w: float) -> float:
    """Answer level at which dL/dw changes sign for ability ``w``."""
    w = float(w)
    if not (0.0 <= w < m.w_max):
        raise DomainError(f"w = {w!r} outside [0, {m.w_max})")
    if m.family in ("dawid_skene", "convex_pl"):
        return (1 + w) / 2
    if m.family == "glad_restricted":
        return float(expit(w))
    return 0.5


# -- joint objective over (x, w; Y) ------------------------------------------


def _check_vectors(m: ModelHandle, x, w, Y: ResponseMatrix) -> tuple[np.ndarray, np.ndarray]:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if x.shape != (Y.d,) or w.shape != (Y.k,):
        raise DomainError(f"expected x of length {Y.d} and w of length {Y.k}, got {x.shape} and {w.shape}")
    if not np.all((x >= 0) & (x <= 1)):
        raise DomainError("x has coordinates outside [0, 1]")
    if not np.all((w >= 0) & (w <= m.w_max)):
        raise DomainError(f"w has coordinates outside [0, {m.w_max}]")
    return x, w


def full_objective(m: ModelHandle, x, w, Y: ResponseMatrix) -> float:
    """Sum of per-response objectives (n = 1) over the observed cells of Y."""
    x, w = _check_vectors(m, x, w, Y)
    rows, cols, ys = Y.arrays()
    total = float(np.sum(per_response_values(m, x[cols], w[rows], ys)))
    if not math.isfinite(total):
        raise DomainError(f"{m.family} objective is infinite at this point")
    return total


def full_gradient(m: ModelHandle, x, w, Y: ResponseMatrix) -> tuple[np.ndarray, np.ndarray]:
    x, w = _check_vectors(m, x, w, Y)
    rows, cols, ys = Y.arrays()
    sign = np.where(ys == 1, 1.0, -1.0)
    xe = np.where(ys == 1, x[cols], 1 - x[cols])
    gx, gw = _grads(m, xe, w[rows])
    grad_x = np.bincount(cols, weights=sign * gx, minlength=Y.d)
    grad_w = np.bincount(rows, weights=gw, minlength=Y.k)
    return grad_x, grad_w
