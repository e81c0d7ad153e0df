"""Joint estimation of answers and abilities, plus rounding and confidence."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .core import ZETA, ModelHandle, ResponseMatrix, ValidationError, check_unit_vector
from .models import _grads, _values, full_objective, scalar_kernel
from .simulate import prng_stream

CONVEX_PL = ModelHandle("convex_pl")


@dataclass
class InferenceResult:
    x_hat: np.ndarray
    w_hat: np.ndarray
    objective: float
    method: str  # alternating | subgradient | epigraph
    iterations: int
    restarts_used: int = 0
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "x_hat": [float(v) for v in self.x_hat],
            "w_hat": [float(v) for v in self.w_hat],
            "objective": float(self.objective),
            "method": self.method,
            "iterations": int(self.iterations),
            "restarts_used": int(self.restarts_used),
            "converged": bool(self.converged),
            "diagnostics": self.diagnostics,
        }


# -- Dawid-Skene alternating minimization -------------------------------------


def majority_vote(Y: ResponseMatrix) -> np.ndarray:
    """Per-question vote share rounded to {0, 0.5, 1}; unasked questions get 0.5."""
    rows, cols, ys = Y.arrays()
    ones = np.bincount(cols, weights=ys, minlength=Y.d)
    total = np.bincount(cols, minlength=Y.d)
    return np.where(2 * ones > total, 1.0, np.where(2 * ones < total, 0.0, 0.5))


def _ds_coordinate_descent(x, rows, cols, ys, k, d, m, tol=1e-10, max_iter=1000):
    counts = np.bincount(rows, minlength=k)
    upper = m.w_max - ZETA
    sign = np.where(ys == 1, -1.0, 1.0)
    w = np.zeros(k)
    history = []
    prev = math.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # w-step: worker i minimizes -(A log(1+w) + B log(1-w)) on [0, upper]
        agree = np.bincount(rows, weights=np.where(ys == 1, x[cols], 1 - x[cols]), minlength=k)
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(counts > 0, (2 * agree - counts) / counts, 0.0)
        w = np.clip(w, 0.0, upper)
        history.append(_ds_total(m, x, w, rows, cols, ys))

        # x-step: the objective is affine in each x_j
        llr = np.log1p(w) - np.log1p(-w)
        coef = np.bincount(cols, weights=sign * llr[rows], minlength=d)
        x = np.where(coef < -1e-12, 1.0, np.where(coef > 1e-12, 0.0, 0.5))
        obj = _ds_total(m, x, w, rows, cols, ys)
        history.append(obj)
        if prev - obj < tol:
            converged = True
            break
        prev = obj
    return x, w, history, it, converged


def _ds_total(m, x, w, rows, cols, ys):
    xe = np.where(ys == 1, x[cols], 1 - x[cols])
    return float(np.sum(_values(m, xe, w[rows])))


def infer_alternating(
    m: ModelHandle, Y: ResponseMatrix, restarts: int, seed: int, max_iter: int = 1000
) -> InferenceResult:
    """Exact coordinate minimization of the Dawid-Skene likelihood.

    Runs from a majority-vote start and ``restarts`` uniformly random answer
    vectors; keeps the lowest objective, ties going to the earliest start.
    """
    if m.family != "dawid_skene":
        raise ValidationError("alternating minimization is only defined for dawid_skene")
    if restarts < 1:
        raise ValidationError("restarts must be at least 1")
    rows, cols, ys = Y.arrays()
    rng = prng_stream(seed)
    starts = [majority_vote(Y)] + [rng.doubles(Y.d) for _ in range(restarts)]

    best = None
    for idx, x0 in enumerate(starts):
        x, w, history, it, conv = _ds_coordinate_descent(x0, rows, cols, ys, Y.k, Y.d, m, max_iter=max_iter)
        obj = full_objective(m, x, w, Y)
        if best is None or obj < best[0] - 1e-12:
            best = (obj, idx, x, w, history, it, conv)
    obj, idx, x, w, history, it, conv = best
    return InferenceResult(
        x_hat=x,
        w_hat=w,
        objective=obj,
        method="alternating",
        iterations=it,
        restarts_used=restarts,
        converged=conv,
        diagnostics={"best_start": idx, "history": history},
    )


# -- projected subgradient descent --------------------------------------------


def _subgradient_small(f, cells, x, w, steps, step0, w_hi):
    d, k = len(x), len(w)
    best = (math.inf, x, w, 0)
    for t in range(1, steps + 1):
        gx = [0.0] * d
        gw = [0.0] * k
        val = 0.0
        for i, j, y in cells:
            v, a, b = f(x[j] if y else 1.0 - x[j], w[i])
            val += v
            gx[j] += a if y else -a
            gw[i] += b
        if val < best[0]:
            best = (val, x, w, t - 1)
        step = step0 / math.sqrt(t)
        x = [min(max(xi - step * g, 0.0), 1.0) for xi, g in zip(x, gx)]
        w = [min(max(wi - step * g, 0.0), w_hi) for wi, g in zip(w, gw)]
    final = sum(f(x[j] if y else 1.0 - x[j], w[i])[0] for i, j, y in cells)
    if final < best[0]:
        best = (final, x, w, steps)
    return best, np.array(x), np.array(w)


def _subgradient_vec(m, Y, x, w, steps, step0, w_hi):
    rows, cols, ys = Y.arrays()
    flip = ys == 0
    sign = np.where(flip, -1.0, 1.0)
    best = (math.inf, x, w, 0)

    def at(x, w):
        xe = np.where(flip, 1 - x[cols], x[cols])
        return xe, w[rows]

    for t in range(1, steps + 1):
        xe, wr = at(x, w)
        val = float(np.sum(_values(m, xe, wr)))
        if val < best[0]:
            best = (val, x, w, t - 1)
        gx, gw = _grads(m, xe, wr)
        step = step0 / math.sqrt(t)
        x = np.clip(x - step * np.bincount(cols, weights=sign * gx, minlength=Y.d), 0.0, 1.0)
        w = np.clip(w - step * np.bincount(rows, weights=gw, minlength=Y.k), 0.0, w_hi)
    final = float(np.sum(_values(m, *at(x, w))))
    if final < best[0]:
        best = (final, x, w, steps)
    return best, x, w


SMALL_INSTANCE = 64


def infer_subgradient(m: ModelHandle, Y: ResponseMatrix, steps: int, step0: float) -> InferenceResult:
    """Projected (sub)gradient descent with step ``step0 / sqrt(t)``.

    Starts from x = 1/2, w = W_max/2 and returns the best iterate seen
    (iterate 0 is the start); the final iterate goes into ``diagnostics``.
    Dawid-Skene abilities are kept below ``1 - ZETA``.
    """
    if steps < 1:
        raise ValidationError("steps must be at least 1")
    if not step0 > 0:
        raise ValidationError("step0 must be positive")
    w_hi = m.w_max - ZETA if m.family == "dawid_skene" else m.w_max
    x0 = np.full(Y.d, 0.5)
    w0 = np.full(Y.k, m.w_max / 2)
    if Y.n_responses <= SMALL_INSTANCE:
        best, xf, wf = _subgradient_small(scalar_kernel(m), Y.entries, x0.tolist(), w0.tolist(), steps, step0, w_hi)
    else:
        best, xf, wf = _subgradient_vec(m, Y, x0, w0, steps, step0, w_hi)
    _, bx, bw, bt = best
    bx, bw = np.array(bx, dtype=float), np.array(bw, dtype=float)
    return InferenceResult(
        x_hat=bx,
        w_hat=bw,
        objective=full_objective(m, bx, bw, Y),
        method="subgradient",
        iterations=steps,
        converged=False,
        diagnostics={
            "best_iterate": bt,
            "final_x": xf.tolist(),
            "final_w": wf.tolist(),
            "final_objective": full_objective(m, xf, wf, Y),
        },
    )


# -- epigraph LP for the convex piecewise-linear objective --------------------


def epigraph_lp(Y: ResponseMatrix, w_max: float = 1.0):
    """LP data (c, A_ub, b_ub, bounds) over variables [x (d), w (k), t (n)].

    Each observed cell contributes two rows ``hyperplane <= t``. For y = 1
    the hyperplanes are -w - x - 1 and w - 5x + 1; for y = 0 they are the
    reflections -w + x - 2 and w + 5x - 4.
    """
    rows, cols, ys = Y.arrays()
    n, d, k = Y.n_responses, Y.d, Y.k
    nvar = d + k + n
    A = np.zeros((2 * n, nvar))
    b = np.zeros(2 * n)
    for c, (i, j, y) in enumerate(zip(rows, cols, ys)):
        xi, wi, ti = j, d + i, d + k + c
        if y == 1:
            planes = ((-1.0, -1.0, -1.0), (-5.0, 1.0, 1.0))
        else:
            planes = ((1.0, -1.0, -2.0), (5.0, 1.0, -4.0))
        for r, (ax, aw, const) in enumerate(planes):
            A[2 * c + r, xi] = ax
            A[2 * c + r, wi] = aw
            A[2 * c + r, ti] = -1.0
            b[2 * c + r] = -const
    cost = np.concatenate([np.zeros(d + k), np.ones(n)])
    bounds = [(0.0, 1.0)] * d + [(0.0, w_max)] * k + [(None, None)] * n
    return cost, A, b, bounds


def _lagrangian_bound(cost, A, b, bounds, mu) -> float:
    reduced = cost + A.T @ mu
    total = -float(mu @ b)
    for r, (lo, hi) in zip(reduced, bounds):
        if lo is None or hi is None:
            if abs(r) > 1e-9:
                return -math.inf
            continue
        total += min(r * lo, r * hi)
    return total


def solve_convex(Y: ResponseMatrix, m: Optional[ModelHandle] = None) -> InferenceResult:
    """Global minimizer of the convex piecewise-linear objective via its epigraph LP.

    ``diagnostics["gap"]`` is the distance between the attained objective and
    a Lagrangian lower bound built from the LP duals.
    """
    m = m or CONVEX_PL
    if m.family != "convex_pl":
        raise ValidationError("solve_convex needs the convex_pl family")
    cost, A, b, bounds = epigraph_lp(Y, m.w_max)
    res = linprog(cost, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    d, k = Y.d, Y.k
    # + 0.0 turns -0.0 into 0.0
    x = np.clip(res.x[:d], 0.0, 1.0) + 0.0
    w = np.clip(res.x[d : d + k], 0.0, m.w_max) + 0.0
    obj = full_objective(m, x, w, Y)
    lower = float(_lagrangian_bound(cost, A, b, bounds, -res.ineqlin.marginals))
    return InferenceResult(
        x_hat=x,
        w_hat=w,
        objective=obj,
        method="epigraph",
        iterations=int(res.nit),
        converged=True,
        diagnostics={"lp_objective": float(res.fun), "lower_bound": lower, "gap": obj - lower},
    )


# -- post-processing ----------------------------------------------------------


def round_deterministic(x_hat) -> np.ndarray:
    """1 where x_hat > 0.5 (strictly), else 0."""
    return (check_unit_vector(x_hat) > 0.5).astype(np.int64)


def round_probabilistic(x_hat, seed: int) -> np.ndarray:
    """Independent Bernoulli(x_hat_j) draws from the splitmix64 stream."""
    x = check_unit_vector(x_hat)
    return (prng_stream(seed).doubles(x.size) < x).astype(np.int64)


def confidence(x_hat) -> np.ndarray:
    return np.abs(check_unit_vector(x_hat) - 0.5)
