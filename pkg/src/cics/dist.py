"""Finite discrete distributions and the scalar solves built on them.

A :class:`Dist` is immutable and canonical: atoms sorted by value, near-equal
values merged, probabilities normalized to sum to one.  Public constructors
reject negative values; internal code (surrogate costs in the maximization
mirror can go negative) uses :meth:`Dist.from_atoms`, which does not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Literal, Sequence

import numpy as np

from .errors import DomainError

EPS = 1e-9
EPS_P = 1e-12
# atoms lighter than this are numerical debris from curve arithmetic
PROB_FLOOR = 1e-15

Side = Literal["below", "above"]
Mode = Literal["min", "max"]


def check_mode(mode: str) -> str:
    if mode not in ("min", "max"):
        raise DomainError(f"mode must be 'min' or 'max', got {mode!r}")
    return mode


def close(a: float, b: float, tol: float = EPS) -> bool:
    """Absolute-or-relative float comparison used for value keys."""
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


@dataclass(frozen=True)
class Dist:
    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.probs) or not self.values:
            raise DomainError("a distribution needs at least one atom")

    @classmethod
    def from_atoms(cls, pairs: Iterable[tuple[float, float]], merge_tol: float = EPS) -> "Dist":
        """Canonicalize arbitrary (value, weight) pairs without domain checks.

        Weights need not sum to one.  Values within ``merge_tol`` (relative)
        of their left neighbour are merged into it.
        """
        items = sorted((float(v), float(p)) for v, p in pairs if p > PROB_FLOOR)
        if not items:
            raise DomainError("no atom carries positive probability")
        vals: list[float] = []
        ps: list[float] = []
        for v, p in items:
            if not math.isfinite(v):
                raise DomainError(f"non-finite atom value {v}")
            if vals and close(vals[-1], v, merge_tol):
                # keep the heavier representative so keys stay stable
                if p > ps[-1]:
                    vals[-1] = v
                ps[-1] += p
            else:
                vals.append(v)
                ps.append(p)
        total = math.fsum(ps)
        return cls(tuple(vals), tuple(p / total for p in ps))

    # -- basic views -----------------------------------------------------
    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.values, self.probs))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        return math.fsum(v * p for v, p in zip(self.values, self.probs))

    @property
    def median(self) -> float:
        return quantile(self, 0.5)

    @property
    def lo(self) -> float:
        return self.values[0]

    @property
    def hi(self) -> float:
        return self.values[-1]

    def cdf(self, x: float) -> float:
        return math.fsum(p for v, p in zip(self.values, self.probs) if v <= x)

    def scale(self, a: float) -> "Dist":
        return Dist.from_atoms((a * v, p) for v, p in self.atoms)

    def shift(self, b: float) -> "Dist":
        return Dist.from_atoms((v + b, p) for v, p in self.atoms)

    def map(self, f: Callable[[float], float]) -> "Dist":
        """Pushforward under ``f``."""
        return Dist.from_atoms((f(v), p) for v, p in self.atoms)

    def allclose(self, other: "Dist", tol: float = EPS) -> bool:
        if len(self) != len(other):
            return False
        return all(close(a, b, tol) for a, b in zip(self.values, other.values)) and all(
            abs(a - b) <= tol for a, b in zip(self.probs, other.probs)
        )

    def to_pairs(self) -> list[list[float]]:
        return [[v, p] for v, p in self.atoms]


def make_dist(pairs: Iterable[tuple[float, float]]) -> Dist:
    """Validate and canonicalize a user-supplied list of (value, prob) pairs."""
    pairs = [(float(v), float(p)) for v, p in pairs]
    if not pairs:
        raise DomainError("empty distribution")
    for v, p in pairs:
        if not math.isfinite(v) or v < 0:
            raise DomainError(f"negative or non-finite value {v}")
        if not p > 0:
            raise DomainError(f"nonpositive probability {p}")
    total = math.fsum(p for _, p in pairs)
    if abs(total - 1.0) > EPS_P * max(1, len(pairs)):
        raise DomainError(f"probabilities sum to {total!r}, not 1")
    return Dist.from_atoms(pairs, merge_tol=0.0)


def point(v: float) -> Dist:
    return Dist((float(v),), (1.0,))


def mixture(weighted: Sequence[tuple[float, Dist]]) -> Dist:
    """Mixture of distributions with the given (nonnegative) weights."""
    return Dist.from_atoms((v, w * p) for w, d in weighted for v, p in d.atoms)


def moments(D: Dist) -> dict:
    return {"mean": D.mean, "median": D.median}


def expected_shortfall(D: Dist, t: float, side: Side = "below") -> float:
    v = np.asarray(D.values)
    p = np.asarray(D.probs)
    if side == "below":
        return float(np.dot(p, np.maximum(t - v, 0.0)))
    if side == "above":
        return float(np.dot(p, np.maximum(v - t, 0.0)))
    raise DomainError(f"side must be 'below' or 'above', got {side!r}")


def expected_clamp(D: Dist, y: float, mode: Mode = "min") -> float:
    v = np.asarray(D.values)
    p = np.asarray(D.probs)
    if check_mode(mode) == "min":
        return float(np.dot(p, np.minimum(y, v)))
    return float(np.dot(p, np.maximum(y, v)))


def _solve_below(values: Sequence[float], probs: Sequence[float], c: float) -> float:
    """Smallest g with sum p (g - v)^+ = c, walking the piecewise-linear sum."""
    if c <= 0:
        return values[0]
    acc = 0.0
    mass = 0.0
    n = len(values)
    for i in range(n):
        mass += probs[i]
        if i + 1 < n:
            gain = mass * (values[i + 1] - values[i])
            if acc + gain >= c:
                return values[i] + (c - acc) / mass
            acc += gain
        else:
            # slope is the full mass past the last atom
            return values[i] + (c - acc) / mass
    raise AssertionError("unreachable")


def _solve_above(values: Sequence[float], probs: Sequence[float], c: float) -> float:
    """Largest h with sum p (v - h)^+ = c.  May return a value below the support."""
    if c <= 0:
        return values[-1]
    acc = 0.0
    mass = 0.0
    for i in range(len(values) - 1, -1, -1):
        mass += probs[i]
        if i > 0:
            gain = mass * (values[i] - values[i - 1])
            if acc + gain >= c:
                return values[i] - (c - acc) / mass
            acc += gain
        else:
            return values[i] - (c - acc) / mass
    raise AssertionError("unreachable")


def solve_index(D: Dist, c: float, side: Side = "below") -> float:
    """Solve ``c = E[(g - X)^+]`` (below) or ``c = E[(X - g)^+]`` (above).

    At ``c = 0`` the boundary of the solution set is returned: the minimum
    of the support for ``below``, the maximum for ``above``.
    """
    if c < 0 or not math.isfinite(c):
        raise DomainError(f"cost must be a nonnegative finite number, got {c}")
    if side == "below":
        return _solve_below(D.values, D.probs, c)
    if side == "above":
        if D.lo >= 0 and c > D.mean * (1 + EPS) + EPS:
            raise DomainError(
                f"no nonnegative solution of c = E[(X-h)^+]: c={c} exceeds E[X]={D.mean}"
            )
        return _solve_above(D.values, D.probs, c)
    raise DomainError(f"side must be 'below' or 'above', got {side!r}")


def quantile(D: Dist, q: float) -> float:
    """Smallest atom whose cumulative probability reaches ``q``."""
    if not 0 <= q <= 1:
        raise DomainError(f"quantile level {q} outside [0, 1]")
    cum = 0.0
    for v, p in D.atoms:
        cum += p
        if cum >= q - EPS_P:
            return v
    return D.hi


def condition_split(D: Dist, t: float) -> dict:
    """Split ``D`` at ``t`` into the conditional laws of X <= t and X > t."""
    if not (D.lo <= t < D.hi):
        raise DomainError(f"threshold {t} leaves one side of the split empty")
    le = [(v, p) for v, p in D.atoms if v <= t]
    gt = [(v, p) for v, p in D.atoms if v > t]
    p_le = math.fsum(p for _, p in le)
    return {
        "le": Dist.from_atoms(le, merge_tol=0.0),
        "p_le": p_le,
        "gt": Dist.from_atoms(gt, merge_tol=0.0),
        "p_gt": 1.0 - p_le,
    }
