"""Synthetic Dawid-Skene responses and the package-wide PRNG.

All randomness comes from splitmix64. Its t-th output depends only on
``seed + t * GOLDEN``, so blocks of draws are produced with vectorized uint64
arithmetic and stay bit-identical to the sequential recurrence.

Draw order used by :func:`generate` (one uniform per item):

1. true answers, question by question: ``x*_j = 1`` iff ``u < 0.5``;
2. worker reliabilities, worker by worker: ``p_i = lo + u (hi - lo)`` for the
   range of the worker's ability group (groups take consecutive workers);
3. the assignment mask: nothing for ``full``; row-major (worker, then
   question) ``u < rho`` for ``probability``; for ``replication`` a partial
   Fisher-Yates shuffle of the workers per question, ``r`` draws each;
4. responses, row-major over assigned cells: correct iff ``u < p_i``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .core import ResponseMatrix, ValidationError, validate_responses

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO_M53 = 2.0**-53


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """splitmix64 generator with scalar and block draws."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & MASK64
        return z ^ (z >> 31)

    def next_double(self) -> float:
        return (self.next_u64() >> 11) * _TWO_M53

    def u64_block(self, count: int) -> np.ndarray:
        steps = np.arange(1, count + 1, dtype=np.uint64)
        states = np.uint64(self.state) + steps * np.uint64(GOLDEN)
        self.state = (self.state + count * GOLDEN) & MASK64
        return _mix(states)

    def doubles(self, count: int) -> np.ndarray:
        """``count`` uniforms in [0, 1)."""
        return (self.u64_block(count) >> np.uint64(11)).astype(np.float64) * _TWO_M53

    def open_doubles(self, count: int) -> np.ndarray:
        """``count`` uniforms in the open interval (0, 1)."""
        return ((self.u64_block(count) >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def prng_stream(seed: int) -> SplitMix64:
    return SplitMix64(seed)


# -- configuration ------------------------------------------------------------


@dataclass(frozen=True)
class AbilityGroup:
    fraction: float
    p_range: tuple[float, float]


@dataclass(frozen=True)
class Assignment:
    kind: str = "full"  # full | replication | probability
    r: int = 0
    rho: float = 1.0


@dataclass(frozen=True)
class SimConfig:
    k: int
    d: int
    ability_spec: tuple[AbilityGroup, ...]
    assignment: Assignment = field(default_factory=Assignment)
    seed: int = 0

    def __post_init__(self):
        if not (isinstance(self.k, int) and self.k >= 1 and isinstance(self.d, int) and self.d >= 1):
            raise ValidationError("k and d must be positive integers")
        if not self.ability_spec:
            raise ValidationError("ability_spec is empty")
        total = 0.0
        for g in self.ability_spec:
            lo, hi = g.p_range
            if not (0.5 <= lo <= hi <= 1.0):
                raise ValidationError(f"p-range {g.p_range} not inside [0.5, 1]")
            if not g.fraction > 0:
                raise ValidationError("group fractions must be positive")
            total += g.fraction
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"ability fractions sum to {total}, not 1")
        a = self.assignment
        if a.kind == "replication":
            if not (isinstance(a.r, int) and 1 <= a.r <= self.k):
                raise ValidationError(f"replication r must be in [1, {self.k}]")
        elif a.kind == "probability":
            if not (0 < a.rho <= 1):
                raise ValidationError("assignment probability rho must be in (0, 1]")
        elif a.kind != "full":
            raise ValidationError(f"unknown assignment kind {a.kind!r}")

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "SimConfig":
        try:
            groups = tuple(
                AbilityGroup(float(g["fraction"]), (float(g["p_range"][0]), float(g["p_range"][1])))
                for g in obj["ability_spec"]
            )
            a = obj.get("assignment", {"kind": "full"})
            assignment = Assignment(a.get("kind", "full"), int(a.get("r", 0)), float(a.get("rho", 1.0)))
            return cls(int(obj["k"]), int(obj["d"]), groups, assignment, int(obj.get("seed", 0)))
        except (KeyError, TypeError, IndexError) as exc:
            raise ValidationError(f"bad simulation config: {exc!r}") from None

    def to_dict(self) -> dict:
        a = self.assignment
        assignment = {"kind": a.kind}
        if a.kind == "replication":
            assignment["r"] = a.r
        elif a.kind == "probability":
            assignment["rho"] = a.rho
        return {
            "k": self.k,
            "d": self.d,
            "ability_spec": [{"fraction": g.fraction, "p_range": list(g.p_range)} for g in self.ability_spec],
            "assignment": assignment,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class GroundTruth:
    x_star: np.ndarray
    p: np.ndarray

    @property
    def w(self) -> np.ndarray:
        return 2 * self.p - 1

    def to_dict(self) -> dict:
        return {
            "x_star": [int(v) for v in self.x_star],
            "p": [float(v) for v in self.p],
            "w": [float(v) for v in self.w],
        }

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "GroundTruth":
        return cls(np.asarray(obj["x_star"], dtype=np.int64), np.asarray(obj["p"], dtype=float))


def _group_sizes(fractions: list[float], k: int) -> list[int]:
    # largest-remainder apportionment, ties to the earlier group
    raw = [f * k for f in fractions]
    sizes = [math.floor(v) for v in raw]
    order = sorted(range(len(raw)), key=lambda g: (-(raw[g] - sizes[g]), g))
    for g in order[: k - sum(sizes)]:
        sizes[g] += 1
    return sizes


def generate(cfg: SimConfig) -> tuple[GroundTruth, ResponseMatrix]:
    """Draw true answers, worker reliabilities and responses for ``cfg``."""
    rng = prng_stream(cfg.seed)
    k, d = cfg.k, cfg.d

    x_star = (rng.doubles(d) < 0.5).astype(np.int64)

    sizes = _group_sizes([g.fraction for g in cfg.ability_spec], k)
    lo = np.repeat([g.p_range[0] for g in cfg.ability_spec], sizes)
    hi = np.repeat([g.p_range[1] for g in cfg.ability_spec], sizes)
    p = lo + rng.doubles(k) * (hi - lo)

    a = cfg.assignment
    if a.kind == "full":
        mask = np.ones((k, d), dtype=bool)
    elif a.kind == "probability":
        mask = (rng.doubles(k * d) < a.rho).reshape(k, d)
    else:
        mask = np.zeros((k, d), dtype=bool)
        for j in range(d):
            perm = list(range(k))
            for t, u in enumerate(rng.doubles(a.r)):
                s = t + int(u * (k - t))
                perm[t], perm[s] = perm[s], perm[t]
            mask[perm[: a.r], j] = True

    rows, cols = np.nonzero(mask)  # row-major
    if rows.size == 0:
        raise ValidationError("assignment produced no responses; raise rho or change the seed")
    correct = rng.doubles(rows.size) < p[rows]
    truth_at = x_star[cols]
    ys = np.where(correct, truth_at, 1 - truth_at)
    Y = validate_responses(
        k, d, ((int(i) + 1, int(j) + 1, int(y)) for i, j, y in zip(rows, cols, ys))
    )
    return GroundTruth(x_star, p), Y


def evaluate(result, truth: GroundTruth) -> dict:
    """Accuracy after deterministic rounding, mean answer error, ability RMSE."""
    from .infer import round_deterministic

    x_hat = np.asarray(result.x_hat, dtype=float)
    w_hat = np.asarray(result.w_hat, dtype=float)
    if x_hat.shape != truth.x_star.shape or w_hat.shape != truth.p.shape:
        raise ValidationError("result and ground truth dimensions differ")
    rounded = round_deterministic(x_hat)
    return {
        "accuracy": float(np.mean(rounded == truth.x_star)),
        "answer_mae": float(np.mean(np.abs(x_hat - truth.x_star))),
        "ability_rmse": float(np.linalg.norm(w_hat - truth.w) / math.sqrt(w_hat.size)),
    }


def dump_truth(truth: GroundTruth) -> str:
    return json.dumps(truth.to_dict(), indent=2)
