"""Piecewise-linear optimality curves and stochastic dominance.

Curves are stored exactly as knot lists with explicit tail slopes; nothing is
ever sampled on a grid.  A min-mode curve of a distribution W is
``y -> E[min(y, W)]`` and a max-mode curve is ``y -> E[max(y, W)]``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

from .dist import EPS, PROB_FLOOR, Dist, DomainError, check_mode, close, expected_clamp

# slope changes below this are treated as collinear
SLOPE_TOL = 1e-12


@dataclass(frozen=True)
class Curve:
    """Continuous piecewise-linear function on the real line.

    ``xs``/``fs`` are the knots; left of ``xs[0]`` the curve continues with
    ``left_slope`` and right of ``xs[-1]`` with ``right_slope``.
    """

    mode: str
    xs: tuple[float, ...]
    fs: tuple[float, ...]
    left_slope: float
    right_slope: float

    def __post_init__(self):
        check_mode(self.mode)
        if not self.xs or len(self.xs) != len(self.fs):
            raise DomainError("a curve needs at least one knot")

    def __call__(self, y: float) -> float:
        xs, fs = self.xs, self.fs
        if y <= xs[0]:
            return fs[0] + self.left_slope * (y - xs[0])
        if y >= xs[-1]:
            return fs[-1] + self.right_slope * (y - xs[-1])
        j = bisect.bisect_right(xs, y)
        x0, x1 = xs[j - 1], xs[j]
        t = (y - x0) / (x1 - x0)
        return fs[j - 1] + t * (fs[j] - fs[j - 1])

    def slopes(self) -> list[float]:
        """Slopes of all pieces, left tail first, right tail last."""
        inner = [
            (self.fs[i + 1] - self.fs[i]) / (self.xs[i + 1] - self.xs[i])
            for i in range(len(self.xs) - 1)
        ]
        return [self.left_slope, *inner, self.right_slope]

    @property
    def breakpoints(self) -> list[tuple[float, float]]:
        """(y, slope to the right of y) for every knot."""
        return list(zip(self.xs, self.slopes()[1:]))

    @property
    def value_at_zero(self) -> float:
        return self(0.0)

    def table(self) -> list[tuple[float, float, float]]:
        return [(x, f, s) for (x, s), f in zip(self.breakpoints, self.fs)]


def _simplify(mode, xs, fs, ls, rs) -> Curve:
    """Drop knots that are duplicates or sit on a straight segment."""
    px: list[float] = []
    pf: list[float] = []
    for x, f in zip(xs, fs):
        if px and x - px[-1] <= EPS * 1e-3 * max(1.0, abs(x)):
            continue
        px.append(x)
        pf.append(f)
    if len(px) == 1:
        return Curve(mode, tuple(px), tuple(pf), ls, rs)
    slopes = [ls] + [(pf[i + 1] - pf[i]) / (px[i + 1] - px[i]) for i in range(len(px) - 1)] + [rs]
    keep_x, keep_f = [], []
    for i, (x, f) in enumerate(zip(px, pf)):
        if abs(slopes[i] - slopes[i + 1]) > SLOPE_TOL:
            keep_x.append(x)
            keep_f.append(f)
    if not keep_x:
        keep_x, keep_f = [px[0]], [pf[0]]
    return Curve(mode, tuple(keep_x), tuple(keep_f), ls, rs)


def curve_of(W: Dist, mode: str = "min") -> Curve:
    """``y -> E[min(y, W)]`` (min) or ``y -> E[max(y, W)]`` (max)."""
    check_mode(mode)
    fs = tuple(expected_clamp(W, v, mode) for v in W.values)
    if mode == "min":
        return Curve(mode, W.values, fs, 1.0, 0.0)
    return Curve(mode, W.values, fs, 0.0, 1.0)


def identity_curve(mode: str = "min") -> Curve:
    """The outside option ``y`` itself."""
    return Curve(check_mode(mode), (0.0,), (0.0,), 1.0, 1.0)


def dist_of(f: Curve, tol: float = 1e-9) -> Dist:
    """Recover the distribution whose clamp curve is ``f``.

    Atom probabilities are slope drops (min) or slope rises (max).
    """
    s = f.slopes()
    for v in s:
        if v < -tol or v > 1 + tol:
            raise DomainError(f"malformed curve: slope {v} outside [0, 1]")
    if f.mode == "min":
        if abs(s[0] - 1) > tol or abs(s[-1]) > tol:
            raise DomainError("malformed min-curve: tails must have slopes 1 and 0")
        jumps = [s[i] - s[i + 1] for i in range(len(f.xs))]
    else:
        if abs(s[0]) > tol or abs(s[-1] - 1) > tol:
            raise DomainError("malformed max-curve: tails must have slopes 0 and 1")
        jumps = [s[i + 1] - s[i] for i in range(len(f.xs))]
    if min(jumps) < -tol:
        raise DomainError("malformed curve: slopes are not monotone")
    pairs = [(x, j) for x, j in zip(f.xs, jumps) if j > PROB_FLOOR]
    return Dist.from_atoms(pairs)


def _pieces_at(curves: Sequence[Curve], lo: float, hi: float):
    """Anchor point and (slope, value at anchor) of every curve on (lo, hi)."""
    anchor = hi if math.isinf(lo) else lo
    probe = hi - 1.0 if math.isinf(lo) else (lo + 1.0 if math.isinf(hi) else 0.5 * (lo + hi))
    out = []
    for c in curves:
        if probe <= c.xs[0]:
            s = c.left_slope
        elif probe >= c.xs[-1]:
            s = c.right_slope
        else:
            j = bisect.bisect_right(c.xs, probe)
            s = (c.fs[j] - c.fs[j - 1]) / (c.xs[j] - c.xs[j - 1])
        out.append((s, c(anchor)))
    return anchor, out


def combine(curves: Sequence[Curve]) -> Curve:
    """Exact pointwise min (min-mode) or max (max-mode) envelope."""
    if not curves:
        raise DomainError("combine needs at least one curve")
    mode = curves[0].mode
    if any(c.mode != mode for c in curves):
        raise DomainError("cannot combine curves of different modes")
    if len(curves) == 1:
        return curves[0]
    pick = min if mode == "min" else max
    knots = sorted({x for c in curves for x in c.xs})
    cuts = [-math.inf, *knots, math.inf]
    pts = set(knots)
    # all pieces are straight between consecutive knots, so the envelope can
    # only bend there or where two of those straight pieces cross
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        anchor, lines = _pieces_at(curves, lo, hi)
        for i in range(len(lines)):
            for j in range(i + 1, len(lines)):
                (s1, v1), (s2, v2) = lines[i], lines[j]
                if abs(s1 - s2) <= SLOPE_TOL:
                    continue
                y = anchor + (v2 - v1) / (s1 - s2)
                if lo < y < hi:
                    pts.add(y)
    xs = sorted(pts)
    fs = [pick(c(x) for c in curves) for x in xs]
    x0, x1 = xs[0], xs[-1]
    ls = fs[0] - pick(c(x0 - 1.0) for c in curves)
    rs = pick(c(x1 + 1.0) for c in curves) - fs[-1]
    return _simplify(mode, xs, fs, ls, rs)


def weighted_sum(terms: Sequence[tuple[float, Curve]], constant: float = 0.0) -> Curve:
    """``constant + sum_i w_i * f_i`` for curves of a single mode."""
    if not terms:
        raise DomainError("weighted_sum needs at least one term")
    mode = terms[0][1].mode
    xs = sorted({x for _, c in terms for x in c.xs})
    fs = [constant + math.fsum(w * c(x) for w, c in terms) for x in xs]
    ls = math.fsum(w * c.left_slope for w, c in terms)
    rs = math.fsum(w * c.right_slope for w, c in terms)
    return _simplify(mode, xs, fs, ls, rs)


def diag_scale(f: Curve, alpha: float) -> Curve:
    """``y -> alpha * f(y / alpha)``."""
    if f.mode == "min" and alpha < 1:
        raise DomainError(f"min-mode scaling needs alpha >= 1, got {alpha}")
    if f.mode == "max" and not 0 < alpha <= 1:
        raise DomainError(f"max-mode scaling needs alpha in (0, 1], got {alpha}")
    return _scale_unchecked(f, alpha)


def _scale_unchecked(f: Curve, alpha: float) -> Curve:
    return Curve(
        f.mode,
        tuple(alpha * x for x in f.xs),
        tuple(alpha * v for v in f.fs),
        f.left_slope,
        f.right_slope,
    )


def curve_leq(f: Curve, g: Curve, tol: float = EPS, lower: float | None = None):
    """Decide ``f(y) <= g(y)`` for all ``y`` (or all ``y >= lower``).

    Returns ``(True, None)`` or ``(False, y)`` with a witness ``y``.
    """
    xs = sorted({*f.xs, *g.xs} | ({lower} if lower is not None else set()))
    if lower is not None:
        xs = [x for x in xs if x >= lower]
    for x in xs:
        a, b = f(x), g(x)
        if a > b + tol * max(1.0, abs(b)):
            return False, x
    if f.right_slope > g.right_slope + SLOPE_TOL:
        x = xs[-1]
        gap = g(x) - f(x)
        return False, x + (gap + 1.0) / (f.right_slope - g.right_slope)
    if lower is None and f.left_slope < g.left_slope - SLOPE_TOL:
        x = xs[0]
        gap = g(x) - f(x)
        return False, x - (gap + 1.0) / (g.left_slope - f.left_slope)
    return True, None


def second_order_witness(A: Dist, B: Dist, mode: str = "min"):
    """A witness ``y`` where A fails to dominate B in the second order, else None."""
    fa, fb = curve_of(A, mode), curve_of(B, mode)
    ok, y = curve_leq(fa, fb) if mode == "min" else curve_leq(fb, fa)
    return None if ok else y


def dominates_2nd(A: Dist, B: Dist, mode: str = "min") -> bool:
    """E[min(y,A)] <= E[min(y,B)] for all y (min); E[max(y,A)] >= E[max(y,B)] (max)."""
    return second_order_witness(A, B, check_mode(mode)) is None


def first_order_witness(A: Dist, B: Dist, tol: float = 1e-12):
    """A quantile level ``q`` with quantile(A, q) > quantile(B, q), else None.

    Merges the two CDF step functions; A fails exactly where its CDF drops
    below B's, and any level in that gap is a witness.
    """
    grid = sorted({*A.values, *B.values})
    for x in grid:
        fa, fb = A.cdf(x), B.cdf(x)
        if fa < fb - tol:
            return 0.5 * (fa + fb)
    return None


def dominates_1st(A: Dist, B: Dist) -> bool:
    """quantile(A, q) <= quantile(B, q) for every q."""
    return first_order_witness(A, B) is None


def local_approx_factor(W_pi: Dist, W_M: Dist, mode: str = "min", tol: float = 1e-9,
                        cap: float = 1e6, max_iter: int = 200) -> float:
    """Best diagonal scaling of ``W_M`` that ``W_pi`` still dominates.

    Min-mode: smallest alpha >= 1 with f_pi(y) <= alpha f_M(y / alpha).
    Max-mode: largest alpha <= 1 with f_pi(y) >= alpha f_M(y / alpha).
    """
    check_mode(mode)
    f_pi, f_M = curve_of(W_pi, mode), curve_of(W_M, mode)

    def ok(alpha: float) -> bool:
        g = _scale_unchecked(f_M, alpha)
        return curve_leq(f_pi, g)[0] if mode == "min" else curve_leq(g, f_pi)[0]

    if mode == "min":
        if ok(1.0):
            return 1.0
        hi = 2.0
        while not ok(hi):
            hi *= 2
            if hi > cap:
                raise DomainError(f"no finite local approximation factor up to {cap:g}")
        lo = hi / 2
        for _ in range(max_iter):
            if hi - lo <= tol * hi:
                break
            mid = 0.5 * (lo + hi)
            if ok(mid):
                hi = mid
            else:
                lo = mid
        return hi
    if ok(1.0):
        return 1.0
    lo = 0.5
    while not ok(lo):
        lo /= 2
        if lo < 1 / cap:
            raise DomainError(f"no positive local approximation factor down to {1 / cap:g}")
    hi = min(1.0, 2 * lo)
    for _ in range(max_iter):
        if hi - lo <= tol * hi:
            break
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# second-order dominance as an explicit mean-contracting transport


@dataclass(frozen=True)
class StochasticMap:
    """Markov kernel from the atoms of Z to distributions over supp(X)."""

    mode: str
    keys: tuple[float, ...]
    rows: tuple[Dist, ...]

    def row(self, z: float, tol: float = 1e-7) -> Dist:
        j = bisect.bisect_left(self.keys, z)
        best = None
        for k in (j - 1, j):
            if 0 <= k < len(self.keys) and close(self.keys[k], z, tol):
                if best is None or abs(self.keys[k] - z) < abs(self.keys[best] - z):
                    best = k
        if best is None:
            raise KeyError(f"{z} is not in the domain of the map")
        return self.rows[best]

    def __getitem__(self, z: float) -> Dist:
        return self.row(z)

    def apply(self, D: Dist) -> Dist:
        """Distribution of m(z) for z ~ D."""
        return Dist.from_atoms((v, p * q) for z, p in D.atoms for v, q in self.row(z).atoms)

    def as_dict(self) -> dict[float, Dist]:
        return dict(zip(self.keys, self.rows))


@dataclass
class _Atom:
    value: float
    prob: float
    uid: int = field(default=0)


def _sdom_min(X: Dist, Z: Dist, tol: float) -> dict[int, dict[int, float]]:
    """Transport plan for min-mode; returns {z index: {x index: weight}}."""
    xv, xp = X.values, X.probs
    M = len(xv)
    atoms = [_Atom(v, p, i) for i, (v, p) in enumerate(Z.atoms)]
    # plan[z_orig][uid] = mass of original atom z currently sitting on atom uid
    plan: dict[int, dict[int, float]] = {i: {i: 1.0} for i in range(len(atoms))}
    next_uid = len(atoms)

    def scale_of(v: float) -> float:
        return tol * max(1.0, abs(v))

    def curve_val(y: float) -> float:
        return math.fsum(a.prob * min(y, a.value) for a in atoms)

    def fx(y: float) -> float:
        return math.fsum(p * min(y, v) for v, p in zip(xv, xp))

    def find_or_insert(v: float) -> _Atom:
        nonlocal next_uid
        for a in atoms:
            if abs(a.value - v) <= scale_of(v):
                return a
        a = _Atom(v, 0.0, next_uid)
        next_uid += 1
        atoms.append(a)
        atoms.sort(key=lambda t: t.value)
        return a

    def move(src: _Atom, dst: _Atom, frac: float) -> None:
        for row in plan.values():
            w = row.get(src.uid)
            if w:
                row[dst.uid] = row.get(dst.uid, 0.0) + w * frac

    def agrees(i: int) -> bool:
        return (
            i < len(atoms)
            and abs(atoms[i].value - xv[i]) <= scale_of(xv[i])
            and abs(atoms[i].prob - xp[i]) <= 1e-9
        )

    for i in range(M - 1):
        if agrees(i):
            continue
        a = xv[i]
        x1 = xv[i + 1]
        fa = fx(a)
        slope = (fx(x1) - fa) / (x1 - a)

        def gap(y: float) -> float:
            return curve_val(y) - (fa + slope * (y - a))

        # far end s of the chord: last point where the chord still lies below f_Z
        prev = x1
        dprev = gap(prev)
        s = None
        for z in [a.value for a in atoms if a.value > x1 + scale_of(x1)]:
            dz = gap(z)
            if dz < -scale_of(dz):
                s = prev if dprev <= scale_of(dprev) else prev + dprev / (dprev - dz) * (z - prev)
                break
            prev, dprev = z, dz
        if s is None:
            s = prev + max(dprev, 0.0) / slope
        for v in xv[i + 1:]:
            if abs(v - s) <= scale_of(s):
                s = v
                break

        anchor = find_or_insert(a)
        for _ in range(4 * len(atoms) + 8):
            inner = [t for t in atoms if a + scale_of(a) < t.value < s - scale_of(s) and t.prob > 0]
            if not inner:
                break
            z = inner[0]
            later = [t.value for t in atoms if t.value > z.value + scale_of(z.value)]
            b = min(later[0], s) if later else s
            fz_a, fz_z, fz_b = curve_val(a), curve_val(z.value), curve_val(b)
            s1 = (fz_z - fz_a) / (z.value - a)
            s2 = (fz_b - fz_z) / (b - z.value)
            sc = (fz_b - fz_a) / (b - a)
            if s1 - s2 <= 1e-15:
                break
            lam = min(1.0, max(0.0, (s1 - sc) / (s1 - s2)))
            if lam in (0.0, 1.0):
                # the atom already lies on the chord
                break
            right = find_or_insert(b)
            mass = z.prob
            move(z, anchor, lam)
            move(z, right, 1.0 - lam)
            for row in plan.values():
                row.pop(z.uid, None)
            anchor.prob += lam * mass
            right.prob += (1.0 - lam) * mass
            atoms.remove(z)
        atoms[:] = [t for t in atoms if t.prob > PROB_FLOOR or t is anchor]
        pos = atoms.index(anchor)
        if pos != i or abs(anchor.prob - xp[i]) > 1e-7:
            raise AssertionError(
                f"agreement step failed at x={a}: got prob {anchor.prob}, want {xp[i]}"
            )
    # base case: everything left of the last atom agrees, the rest collapses onto it
    where = {}
    for pos, t in enumerate(atoms):
        if pos < M - 1:
            where[t.uid] = pos
        else:
            if t.value < xv[M - 1] - 1e-7 * max(1.0, abs(xv[M - 1])):
                raise AssertionError("residual atom lies below the last atom of X")
            where[t.uid] = M - 1
    out: dict[int, dict[int, float]] = {}
    for zi, row in plan.items():
        acc: dict[int, float] = {}
        for uid, w in row.items():
            if uid in where:
                acc[where[uid]] = acc.get(where[uid], 0.0) + w
        out[zi] = acc
    return out


def sdom_map(X: Dist, Z: Dist, mode: str = "min", tol: float = 1e-9) -> StochasticMap:
    """Kernel m with m(Z) distributed as X and mean(m(z)) <= z (min) / >= z (max).

    Requires ``dominates_2nd(X, Z, mode)``.  The maximization case is handled by
    negating both distributions.
    """
    check_mode(mode)
    y = second_order_witness(X, Z, mode)
    if y is not None:
        raise DomainError(f"second-order dominance fails at y={y!r}")
    if mode == "max":
        inner = sdom_map(X.map(lambda v: -v), Z.map(lambda v: -v), "min", tol)
        keys = Z.values
        rows = tuple(inner.row(-z).map(lambda v: -v) for z in keys)
        return StochasticMap("max", keys, rows)
    plan = _sdom_min(X, Z, tol)
    rows = []
    for zi in range(len(Z)):
        rows.append(Dist.from_atoms(((X.values[k], w) for k, w in plan[zi].items()), merge_tol=0.0))
    return StochasticMap("min", Z.values, tuple(rows))
