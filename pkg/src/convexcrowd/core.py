"""Response matrices, model handles and parameter points.

File formats use 1-based worker/question indices; everything in memory is
0-based. A cell that was never asked is simply absent from the entry list.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable, Mapping

import numpy as np

FAMILIES = (
    "dawid_skene",
    "additive_noise",
    "minimax_restricted",
    "glad_restricted",
    "convex_pl",
)
NOISE_CDFS = ("logistic", "gaussian")

# Inset from W_max used by verification sweeps and by the Dawid-Skene updates
# so that log(1 - w) stays finite.
ZETA = 1e-9


class ValidationError(ValueError):
    """Malformed input data (response files, configs, hyperparameters)."""


class DomainError(ValueError):
    """A parameter lies outside the box on which an objective is defined."""


@dataclass(frozen=True)
class ResponseMatrix:
    """Sparse k x d table of binary worker responses.

    ``entries`` holds 0-based ``(i, j, y)`` triples sorted by worker then
    question. Build instances through :func:`validate_responses`.
    """

    k: int
    d: int
    entries: tuple[tuple[int, int, int], ...]

    @property
    def n_responses(self) -> int:
        return len(self.entries)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (workers, questions, answers) as int arrays."""
        arr = np.asarray(self.entries, dtype=np.int64).reshape(-1, 3)
        return arr[:, 0], arr[:, 1], arr[:, 2]

    def dense(self, missing: int = -1) -> np.ndarray:
        out = np.full((self.k, self.d), missing, dtype=np.int64)
        for i, j, y in self.entries:
            out[i, j] = y
        return out

    def flipped(self) -> "ResponseMatrix":
        """Same assignment with every answer y replaced by 1 - y."""
        return ResponseMatrix(self.k, self.d, tuple((i, j, 1 - y) for i, j, y in self.entries))

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "d": self.d,
            "entries": [{"i": i + 1, "j": j + 1, "y": y} for i, j, y in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "ResponseMatrix":
        try:
            k, d, raw = obj["k"], obj["d"], obj["entries"]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"response object missing field: {exc}") from None
        triples = []
        for e in raw:
            try:
                triples.append((e["i"], e["j"], e["y"]))
            except (KeyError, TypeError):
                raise ValidationError(f"bad entry {e!r}; expected {{'i', 'j', 'y'}}") from None
        return validate_responses(k, d, triples)

    @classmethod
    def from_json(cls, text: str) -> "ResponseMatrix":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from None
        return cls.from_dict(obj)


def _is_int(v: Any) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def validate_responses(k: int, d: int, entries: Iterable[tuple[int, int, int]]) -> ResponseMatrix:
    """Validate 1-based ``(i, j, y)`` triples and build a :class:`ResponseMatrix`."""
    if not _is_int(k) or k < 1:
        raise ValidationError(f"k must be a positive integer, got {k!r}")
    if not _is_int(d) or d < 1:
        raise ValidationError(f"d must be a positive integer, got {d!r}")
    seen: dict[tuple[int, int], int] = {}
    for triple in entries:
        try:
            i, j, y = triple
        except (TypeError, ValueError):
            raise ValidationError(f"entry {triple!r} is not an (i, j, y) triple") from None
        if not (_is_int(i) and 1 <= i <= k):
            raise ValidationError(f"worker index {i!r} outside [1, {k}]")
        if not (_is_int(j) and 1 <= j <= d):
            raise ValidationError(f"question index {j!r} outside [1, {d}]")
        if not _is_int(y) or y not in (0, 1):
            raise ValidationError(f"answer {y!r} at ({i}, {j}) outside {{0, 1}}")
        if (i, j) in seen:
            raise ValidationError(f"duplicate cell ({i}, {j})")
        seen[(i, j)] = int(y)
    if not seen:
        raise ValidationError("response matrix has no entries")
    ordered = tuple((i - 1, j - 1, y) for (i, j), y in sorted(seen.items()))
    return ResponseMatrix(int(k), int(d), ordered)


@dataclass(frozen=True)
class ModelHandle:
    """One objective family together with its hyperparameters.

    ``minimax_raw`` switches the minimax family to the per-cell form exactly
    as displayed (without the dual's leading minus). It exists only so the
    property checks can demonstrate that this form breaks monotonicity in x.
    """

    family: str
    w_max: float = 1.0
    n: int = 1
    noise_cdf: str = "logistic"
    w_min: float = 0.0
    minimax_raw: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if not np.isfinite(self.w_max) or self.w_max <= 0:
            raise ValidationError(f"W_max must be positive, got {self.w_max!r}")
        if not (self.w_min <= 0 < self.w_max):
            raise ValidationError("need W_min <= 0 < W_max")
        if self.family in ("dawid_skene", "convex_pl") and self.w_max > 1:
            raise ValidationError(f"{self.family} is defined for W_max <= 1")
        if not _is_int(self.n) or self.n < 1:
            raise ValidationError(f"n must be a positive integer, got {self.n!r}")
        if self.noise_cdf not in NOISE_CDFS:
            raise ValidationError(f"noise_cdf must be one of {NOISE_CDFS}")
        if self.minimax_raw and self.family != "minimax_restricted":
            raise ValidationError("minimax_raw only applies to minimax_restricted")

    @property
    def models_spammer(self) -> bool:
        return self.family != "convex_pl"

    @property
    def differentiable(self) -> bool:
        return self.family != "convex_pl"

    def to_dict(self) -> dict:
        return {"family": self.family, "W_max": self.w_max, "n": self.n, "noise_cdf": self.noise_cdf}

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "ModelHandle":
        known = {"family", "W_max", "n", "noise_cdf", "W_min"}
        extra = set(obj) - known
        if extra:
            raise ValidationError(f"unknown model keys: {sorted(extra)}")
        if "family" not in obj:
            raise ValidationError("model config needs a 'family'")
        return cls(
            family=obj["family"],
            w_max=float(obj.get("W_max", 1.0)),
            n=obj.get("n", 1),
            noise_cdf=obj.get("noise_cdf", "logistic"),
            w_min=float(obj.get("W_min", 0.0)),
        )


@dataclass(frozen=True)
class ParamPoint:
    """Answer and ability parameters, either scalars or vectors."""

    x: Any
    w: Any

    @property
    def is_scalar(self) -> bool:
        return np.ndim(self.x) == 0 and np.ndim(self.w) == 0

    def check(self, w_max: float) -> None:
        x = np.asarray(self.x, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if not (np.all(np.isfinite(x)) and np.all((x >= 0) & (x <= 1))):
            raise DomainError(f"x outside [0, 1]: {self.x!r}")
        if not (np.all(np.isfinite(w)) and np.all((w >= 0) & (w <= w_max))):
            raise DomainError(f"w outside [0, {w_max}]: {self.w!r}")

    def to_dict(self) -> dict:
        def conv(v):
            return float(v) if np.ndim(v) == 0 else [float(t) for t in np.asarray(v)]

        return {"x": conv(self.x), "w": conv(self.w)}


def check_unit_vector(x_hat: Any, name: str = "x_hat") -> np.ndarray:
    """Coerce to a 1-D float array with every coordinate in [0, 1]."""
    arr = np.atleast_1d(np.asarray(x_hat, dtype=float))
    if arr.ndim != 1:
        raise DomainError(f"{name} must be a vector")
    if not np.all(np.isfinite(arr)) or np.any((arr < 0) | (arr > 1)):
        raise DomainError(f"{name} has coordinates outside [0, 1]")
    return arr
