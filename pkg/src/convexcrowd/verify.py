"""Numerical checks of the objective axioms and properties.

A sweep can only refute a property, never prove it. A passing report says
no counterexample was found at the stated resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .core import ZETA, ModelHandle, ParamPoint, ValidationError
from .models import _values, crossing_g, evaluate, reduced_objective
from .simulate import prng_stream

P1_STEP = 0.01
P1_SLACK = 1e-10
P2_STEP = 0.01
P2_H = 1e-4
P2_BAND = 0.02
P2_SLACK = 1e-12
P3_STEP = 0.001
P3_TOL = 1e-12
AXIOM1_SAMPLES = 50
AXIOM1_SLACK = 1e-12
WITNESS_TOL = 1e-12
PROBE_TOL = 1e-9


@dataclass
class PropertyReport:
    target: str  # P1 | P2 | P3 | Axiom1 | Axiom2
    passed: bool
    grid: dict
    counterexample: Optional[dict] = None
    epsilon: Optional[float] = None

    @property
    def summary(self) -> str:
        if self.passed:
            return f"{self.target}: no counterexample found at resolution {self.grid.get('resolution')}"
        return f"{self.target}: violated"

    def to_dict(self) -> dict:
        out = {"target": self.target, "passed": self.passed, "summary": self.summary, "grid": self.grid}
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        if self.epsilon is not None:
            out["epsilon"] = self.epsilon
        return out


@dataclass
class WitnessReport:
    """Jensen triple: ``margin = L(combo) - (lam L(p1) + (1 - lam) L(p2))``."""

    p1: ParamPoint
    p2: ParamPoint
    lam: float
    combo: ParamPoint
    values: tuple[float, float, float]  # L(p1), L(p2), L(combo)
    lhs: float
    rhs: float
    margin: float
    violated: bool
    tol: float = WITNESS_TOL
    trial: Optional[int] = None

    def to_dict(self) -> dict:
        out = {
            "p1": self.p1.to_dict(),
            "p2": self.p2.to_dict(),
            "lambda": self.lam,
            "combo": self.combo.to_dict(),
            "values": list(self.values),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "violated": self.violated,
            "tol": self.tol,
        }
        if self.trial is not None:
            out["trial"] = self.trial
        return out


def _axis(hi: float, step: float) -> np.ndarray:
    n = int(math.floor(hi / step + 1e-9))
    pts = step * np.arange(n + 1)
    if pts[-1] < hi - 1e-12:
        pts = np.append(pts, hi)
    return np.minimum(pts, hi)


def _w_axis(m: ModelHandle, step: float) -> np.ndarray:
    return np.minimum(_axis(m.w_max, step), m.w_max - ZETA)


def _surface(m: ModelHandle, x, w):
    """n-scaled y=1 objective on the outer product x (rows) by w (cols)."""
    X, W = np.meshgrid(x, w, indexing="ij")
    return m.n * _values(m, X, W)


def _pair(m, a, b):
    (xa, wa), (xb, wb) = a, b
    return {
        "first": {"x": xa, "w": wa, "L": reduced_objective(m, xa, wa, 1)},
        "second": {"x": xb, "w": wb, "L": reduced_objective(m, xb, wb, 1)},
    }


def check_p1(m: ModelHandle) -> PropertyReport:
    """L(x, w; 1) non-increasing in x on a 0.01 grid."""
    x = _axis(1.0, P1_STEP)
    w = _w_axis(m, P1_STEP)
    L = _surface(m, x, w)
    rise = L[1:, :] - L[:-1, :]
    grid = {"x_step": P1_STEP, "w_step": P1_STEP, "w_upper": float(w[-1]), "slack": P1_SLACK, "resolution": P1_STEP}
    if np.all(rise <= P1_SLACK):
        return PropertyReport("P1", True, grid)
    a, b = np.unravel_index(np.argmax(rise), rise.shape)
    ce = _pair(m, (float(x[a]), float(w[b])), (float(x[a + 1]), float(w[b])))
    return PropertyReport("P1", False, grid, ce)


def check_p2(m: ModelHandle) -> PropertyReport:
    """Sign of dL/dw flips at x = g(w), away from a band around the crossing."""
    x = _axis(1.0, P2_STEP)
    w = _w_axis(m, P2_STEP)
    w = w[w + P2_H <= m.w_max - ZETA]
    g = np.array([crossing_g(m, float(v)) for v in w])
    with np.errstate(all="ignore"):
        diff = _surface(m, x, w + P2_H) - _surface(m, x, w)
    X, G = np.meshgrid(x, g, indexing="ij")
    below = X < G - P2_BAND
    above = X > G + P2_BAND
    bad = (below & ~(diff > P2_SLACK)) | (above & ~(diff < -P2_SLACK))
    grid = {
        "x_step": P2_STEP,
        "w_step": P2_STEP,
        "h": P2_H,
        "band": P2_BAND,
        "slack": P2_SLACK,
        "resolution": P2_STEP,
    }
    if not bad.any():
        return PropertyReport("P2", True, grid)
    a, b = np.argwhere(bad)[0]
    xa, wb = float(x[a]), float(w[b])
    ce = _pair(m, (xa, wb), (xa, wb + P2_H))
    ce["g"] = float(g[b])
    ce["expected"] = "increase" if below[a, b] else "decrease"
    return PropertyReport("P2", False, grid, ce)


def check_p3(m: ModelHandle, target: str = "P3") -> PropertyReport:
    """L(x, 0; 1) constant in x (spammer modelling)."""
    x = _axis(1.0, P3_STEP)
    L = _surface(m, x, np.zeros(1))[:, 0]
    dev = np.abs(L - L[0])
    grid = {"x_step": P3_STEP, "w": 0.0, "tol": P3_TOL, "resolution": P3_STEP}
    if dev.max() < P3_TOL:
        return PropertyReport(target, True, grid)
    a = int(np.argmax(dev))
    return PropertyReport(target, False, grid, _pair(m, (0.0, 0.0), (float(x[a]), 0.0)))


def check_axiom2(m: ModelHandle) -> PropertyReport:
    return check_p3(m, target="Axiom2")


def _check_eps(m: ModelHandle, eps: float) -> float:
    eps = float(eps)
    if not (0 < eps < min(0.5, m.w_max)):
        raise ValidationError(f"eps must lie in (0, {min(0.5, m.w_max)}), got {eps}")
    return eps


def check_axiom1(m: ModelHandle, eps: float) -> PropertyReport:
    """Sample both corner boxes of side eps on a 50 x 50 midpoint grid."""
    eps = _check_eps(m, eps)
    offs = (np.arange(AXIOM1_SAMPLES) + 0.5) / AXIOM1_SAMPLES * eps
    grid = {"samples_per_axis": AXIOM1_SAMPLES, "slack": AXIOM1_SLACK, "resolution": eps / AXIOM1_SAMPLES}
    for name, x, sign in (("low", offs, 1.0), ("high", 1.0 - offs, -1.0)):
        diff = _surface(m, x, offs) - _surface(m, x, np.zeros(1))
        bad = ~(sign * diff > AXIOM1_SLACK)
        if bad.any():
            a, b = np.argwhere(bad)[0]
            ce = _pair(m, (float(x[a]), float(offs[b])), (float(x[a]), 0.0))
            ce["box"] = name
            return PropertyReport("Axiom1", False, grid, ce, epsilon=eps)
    return PropertyReport("Axiom1", True, grid, epsilon=eps)


def find_axiom1_eps(m: ModelHandle, delta: float) -> float:
    """eps = min(delta, 1 - g(delta)), valid for any model with a crossing function."""
    delta = float(delta)
    hi = min(1.0, m.w_max) / 2
    if not (0 < delta < hi):
        raise ValidationError(f"delta must lie in (0, {hi}), got {delta}")
    if m.minimax_raw:
        raise ValidationError("the raw minimax form has no crossing function")
    return min(delta, 1.0 - crossing_g(m, delta))


def _witness(m, p1, p2, lam, tol, trial=None) -> WitnessReport:
    combo = ParamPoint(lam * p1.x + (1 - lam) * p2.x, lam * p1.w + (1 - lam) * p2.w)
    v1 = reduced_objective(m, p1.x, p1.w, 1)
    v2 = reduced_objective(m, p2.x, p2.w, 1)
    vc = reduced_objective(m, combo.x, combo.w, 1)
    lhs = lam * v1 + (1 - lam) * v2
    margin = vc - lhs
    return WitnessReport(p1, p2, lam, combo, (v1, v2, vc), lhs, vc, margin, margin > tol, tol, trial)


def theorem1_witness(m: ModelHandle, eps: float) -> WitnessReport:
    """Evaluate the impossibility argument's Jensen triple for this model.

    With weight 1 - eps on (0, 0) and eps on (1 - eps/2, eps/2), the mixture
    is (eps - eps^2/2, eps^2/2). A positive margin refutes convexity.
    """
    eps = _check_eps(m, eps)
    return _witness(m, ParamPoint(0.0, 0.0), ParamPoint(1 - eps / 2, eps / 2), 1 - eps, WITNESS_TOL)


def jensen_probe(
    m: ModelHandle, trials: int, seed: int, tol: float = PROBE_TOL, chunk: int = 1 << 16
) -> Optional[WitnessReport]:
    """Random search for a Jensen violation of L(., .; 1).

    Trial t consumes five consecutive uniforms: x1, w1, x2, w2, lambda, with
    abilities scaled to [0, W_max - zeta] and lambda in (0, 1). Returns the
    lowest-index violation, or None.
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    rng = prng_stream(seed)
    w_hi = m.w_max - ZETA
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        bits = (rng.u64_block(5 * n) >> np.uint64(11)).astype(np.float64).reshape(n, 5)
        u = bits * 2.0**-53
        x1, x2 = u[:, 0], u[:, 2]
        w1, w2 = u[:, 1] * w_hi, u[:, 3] * w_hi
        lam = (bits[:, 4] + 0.5) * 2.0**-53
        xc = lam * x1 + (1 - lam) * x2
        wc = lam * w1 + (1 - lam) * w2
        with np.errstate(all="ignore"):
            margin = m.n * (_values(m, xc, wc) - (lam * _values(m, x1, w1) + (1 - lam) * _values(m, x2, w2)))
        hits = np.flatnonzero(margin > tol)
        for t in hits:
            rep = _witness(
                m,
                ParamPoint(float(x1[t]), float(w1[t])),
                ParamPoint(float(x2[t]), float(w2[t])),
                float(lam[t]),
                tol,
                trial=done + int(t),
            )
            if rep.violated:
                return rep
        done += n
    return None


def _exact_hyperplanes(x: float, w: float) -> tuple[Fraction, Fraction]:
    fx, fw = Fraction(x), Fraction(w)
    return -fw - fx - 1, fw - 5 * fx + 1


def hyperplane_identity(m: ModelHandle, points: int = 201) -> bool:
    """Check L(x, w; 1) = max(H0, H1) exactly, and the reported branch.

    Hyperplanes are evaluated in exact rational arithmetic and rounded once,
    and the branch is compared with the exact sign of 2x - 1 - w.
    """
    if m.family != "convex_pl":
        raise ValidationError("hyperplane_identity applies to convex_pl only")
    xs = np.linspace(0.0, 1.0, points)
    ws = np.linspace(0.0, m.w_max, points)
    for x in xs:
        for w in ws:
            x, w = float(x), float(w)
            ev = evaluate(m, x, w, 1)
            h0, h1 = _exact_hyperplanes(x, w)
            if ev.value != m.n * max(float(h0), float(h1)):
                return False
            s = 2 * Fraction(x) - 1 - Fraction(w)
            want = "H0" if s > 0 else "H1" if s < 0 else "tie"
            if ev.branch != want:
                return False
    return True


@dataclass
class Battery:
    reports: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "reports": [r.to_dict() for r in self.reports]}


def run_battery(m: ModelHandle, delta: float = 0.1, eps: Optional[float] = None) -> Battery:
    """P1, P2, P3 and Axiom 1 (eps from the crossing function unless given)."""
    if eps is None:
        eps = find_axiom1_eps(m, delta)
    return Battery([check_p1(m), check_p2(m), check_p3(m), check_axiom1(m, eps)])
