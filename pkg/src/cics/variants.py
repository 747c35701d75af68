"""Builders and commitment rules for the Pandora box families.

* classical boxes (one costly opening),
* partial inspection (peek cheaply, then open),
* additive boxes (several costly components summed),
* weighing scale (threshold comparisons against the hidden value),
* optional inspection, a maximization problem where a box may be grabbed
  unopened at its mean.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

from .amort import mdp_curve, water_fill
from .cims import Commitment, Node, action, chain_of_dist, get_state, node, terminal
from .curve import Curve, combine, curve_leq, curve_of, identity_curve, weighted_sum
from .dist import (
    EPS,
    Dist,
    _solve_above,
    _solve_below,
    condition_split,
    point,
    quantile,
    solve_index,
)
from .errors import CapExceeded, DomainError

PHI = (1 + math.sqrt(5)) / 2


def _check_cost(c: float, name: str) -> float:
    c = float(c)
    if not math.isfinite(c) or c < 0:
        raise DomainError(f"{name} must be a nonnegative finite number, got {c}")
    return c


# ---------------------------------------------------------------------------
# partial inspection


@dataclass(frozen=True)
class PbpiBox:
    dist: Dist
    open_cost: float
    peek_cost: float

    def __post_init__(self):
        _check_cost(self.open_cost, "open_cost")
        _check_cost(self.peek_cost, "peek_cost")
        if self.has_peek and self.peek_cost == 0:
            raise DomainError("a usable peek action needs a positive peek cost")

    @property
    def has_peek(self) -> bool:
        return self.peek_cost < self.open_cost

    @cached_property
    def g_open(self) -> float:
        return solve_index(self.dist, self.open_cost, "below")

    @cached_property
    def g_peek(self) -> float:
        # c^p = E[(g - X - c^o)^+]
        return solve_index(self.dist.shift(self.open_cost), self.peek_cost, "below")

    def open_curve(self) -> Curve:
        return weighted_sum([(1.0, curve_of(self.dist))], constant=self.open_cost)

    def peek_curve(self) -> Curve:
        return weighted_sum([(1.0, curve_of(self.dist.shift(self.open_cost)))], constant=self.peek_cost)

    @cached_property
    def y_cross(self) -> float:
        """Largest y where opening and peeking cost the same in the local game."""
        fo, fp = self.open_curve(), self.peek_curve()
        xs = sorted({*fo.xs, *fp.xs})
        d = [fo(x) - fp(x) for x in xs]
        for i in range(len(xs) - 1, -1, -1):
            if d[i] >= 0:
                if i == len(xs) - 1:
                    return xs[i]
                return xs[i] + d[i] / (d[i] - d[i + 1]) * (xs[i + 1] - xs[i])
        return xs[0]


def build_pbpi(box: PbpiBox) -> Node:
    """Root chooses "open" or "peek"; a peeked state must still be opened."""
    if not box.has_peek:
        return chain_of_dist(box.dist, box.open_cost, "open")
    opened = action("open", box.open_cost, [(p, terminal(v)) for v, p in box.dist.atoms])
    peeked = action(
        "peek",
        box.peek_cost,
        [(p, node(action("open-after-peek", box.open_cost, [(1.0, terminal(v))]))) for v, p in box.dist.atoms],
    )
    return node(opened, peeked)


def pbpi_commitment(box: PbpiBox, choice: str) -> Commitment:
    """Commitment on ``build_pbpi(box)`` that always opens or always peeks."""
    if choice not in ("open", "peek"):
        raise DomainError(f"unknown PBPI action {choice!r}")
    if not box.has_peek:
        if choice == "peek":
            raise DomainError("this box has no peek action")
        return Commitment({(): (1.0,)})
    if choice == "open":
        return Commitment({(): (1.0, 0.0)})
    out = {(): (0.0, 1.0)}
    for k in range(len(box.dist)):
        out[((1, k),)] = (1.0,)
    return Commitment(out)


def pbpi_commit(box: PbpiBox) -> dict:
    """Open iff (c^o/c^p)(1 - c^o/g^p) <= 1 + min(c^p/c^o, c^o/g^p)."""
    if not box.has_peek:
        return {"action": "open", "rule_lhs": None, "rule_rhs": None}
    co, cp, gp = box.open_cost, box.peek_cost, box.g_peek
    lhs = (co / cp) * (1 - co / gp)
    rhs = 1 + min(cp / co, co / gp)
    if gp >= box.g_open:
        # peeking is dominated; opening wins regardless of the rule
        return {"action": "open", "rule_lhs": lhs, "rule_rhs": rhs}
    return {"action": "open" if lhs <= rhs else "peek", "rule_lhs": lhs, "rule_rhs": rhs}


def pbpi_claims(box: PbpiBox) -> dict:
    """Check min{y, f^x(y)} <= alpha f(y / alpha) for both actions.

    f is the box's optimality curve; the two alphas are the closed forms
    attached to opening and peeking.
    """
    f = mdp_curve(build_pbpi(box))
    co, cp, gp = box.open_cost, box.peek_cost, box.g_peek
    a1 = (co / cp) * (1 - co / gp)
    a2 = 1 + min(cp / co, co / gp)

    def holds(fx: Curve, a: float) -> bool:
        if a < 1:
            return False
        lhs = combine([identity_curve(), fx])
        rhs = Curve("min", tuple(a * x for x in f.xs), tuple(a * v for v in f.fs), f.left_slope, f.right_slope)
        return curve_leq(lhs, rhs)[0]

    return {
        "alpha_open": a1,
        "open_ok": holds(box.open_curve(), a1),
        "alpha_peek": a2,
        "peek_ok": holds(box.peek_curve(), a2),
    }


def pbpi_phi_partition(boxes) -> tuple[set, set]:
    O, P = set(), set()
    for i, b in enumerate(boxes):
        co, cp = b.open_cost, b.peek_cost
        if not b.has_peek or co / cp <= 1 + cp / co:
            O.add(i)
        else:
            P.add(i)
    return O, P


# ---------------------------------------------------------------------------
# additive boxes


@dataclass(frozen=True)
class AdditiveBox:
    components: tuple  # of (Dist, cost)
    cap: int = 5

    def __post_init__(self):
        if not self.components:
            raise DomainError("an additive box needs at least one component")
        for _, c in self.components:
            _check_cost(c, "component cost")

    @property
    def k(self) -> int:
        return len(self.components)


def build_additive(box: AdditiveBox) -> Node:
    """Every adaptive probing order.  Leaves are tagged with atom indices."""
    if box.k > box.cap:
        raise CapExceeded(f"additive box with k={box.k} exceeds the cap of {box.cap}")
    k = box.k

    def rec(probed: dict) -> Node:
        if len(probed) == k:
            v = math.fsum(box.components[j][0].values[probed[j]] for j in range(k))
            return terminal(v, tag=tuple(probed[j] for j in range(k)))
        acts = []
        for j in range(k):
            if j in probed:
                continue
            D, c = box.components[j]
            acts.append(action(f"probe{j}", c, [(p, rec({**probed, j: a})) for a, p in enumerate(D.probs)]))
        return node(*acts)

    return rec({})


def additive_static_chain(box: AdditiveBox, ordering) -> Node:
    """Chain that probes components in a fixed order."""
    ordering = tuple(ordering)
    if sorted(ordering) != list(range(box.k)):
        raise DomainError(f"{ordering} is not a permutation of the components")

    def rec(depth: int, probed: dict) -> Node:
        if depth == box.k:
            v = math.fsum(box.components[j][0].values[probed[j]] for j in range(box.k))
            return terminal(v, tag=tuple(probed[j] for j in range(box.k)))
        j = ordering[depth]
        D, c = box.components[j]
        return node(action(f"probe{j}", c, [(p, rec(depth + 1, {**probed, j: a})) for a, p in enumerate(D.probs)]))

    return rec(0, {})


def additive_static_commit(box: AdditiveBox) -> dict:
    """Fixed order with the smallest root index; ties go to the first in lexicographic order."""
    if box.k > 6:
        raise CapExceeded(f"k={box.k} gives more than 720 orderings")
    best = None
    for perm in itertools.permutations(range(box.k)):
        g = water_fill(additive_static_chain(box, perm)).index
        if best is None or g < best[1] - EPS * max(1.0, abs(best[1])):
            best = (perm, g)
    return {"ordering": best[0], "index": best[1]}


# ---------------------------------------------------------------------------
# weighing scale


@dataclass(frozen=True)
class WsAlternative:
    dist: Dist
    cost: float

    def __post_init__(self):
        if _check_cost(self.cost, "weigh cost") == 0:
            raise DomainError("weighing cost must be positive")

    @property
    def mu(self) -> float:
        return self.dist.mean

    @property
    def median(self) -> float:
        return quantile(self.dist, 0.5)

    @cached_property
    def g(self) -> float:
        return solve_index(self.dist, self.cost, "below")

    @cached_property
    def h(self) -> float | None:
        if self.cost > self.mu:
            return None
        return solve_index(self.dist, self.cost, "above")

    @property
    def kappa(self) -> float | None:
        if self.g > self.mu or self.median <= 0 or self.g <= 0:
            return None
        return self.mu / self.median + math.log2(self.mu / self.g)


def build_ws(alt: WsAlternative, thresholds=None, max_states: int = 200_000) -> Node:
    """Stop-or-weigh tree over a finite threshold menu (default: the support)."""
    menu = sorted(set(alt.dist.values if thresholds is None else map(float, thresholds)))
    count = 0

    def rec(D: Dist) -> Node:
        nonlocal count
        count += 1
        if count > max_states:
            raise CapExceeded(f"weighing tree exceeds {max_states} states")
        acts = [action("stop", 0.0, [(1.0, terminal(D.mean))])]
        if D.hi - D.lo > alt.cost:
            for t in menu:
                if D.lo <= t < D.hi:
                    sp = condition_split(D, t)
                    acts.append(
                        action(f"weigh@{t:g}", alt.cost, [(sp["p_le"], rec(sp["le"])), (sp["p_gt"], rec(sp["gt"]))])
                    )
        return node(*acts)

    return rec(alt.dist)


def halving_thresholds(t1: float, t2: float) -> list[float]:
    out = []
    t = t2
    while t >= t1 - EPS * max(1.0, abs(t1)):
        out.append(t)
        t /= 2
        if len(out) > 2000:
            break
    return out


def ws_halving_chain(alt: WsAlternative, t1: float, t2: float) -> Node:
    """One-sided halving: weigh at t2, t2/2, ... down to t1; stop on the first "above".

    Weighings whose outcome is already certain are skipped.  Terminals are
    tagged with the (lo, hi) support range of their interval.
    """
    D = alt.dist
    steps = []
    for t in halving_thresholds(t1, t2):
        if t < D.lo:
            break
        if t >= D.hi:
            continue
        sp = condition_split(D, t)
        steps.append((sp["p_le"], sp["p_gt"], sp["gt"]))
        D = sp["le"]
    tail: Node = terminal(D.mean, tag=(D.lo, D.hi))
    for p_le, p_gt, gt in reversed(steps):
        tail = node(action("weigh", alt.cost, [(p_le, tail), (p_gt, terminal(gt.mean, tag=(gt.lo, gt.hi)))]))
    return tail


def ws_commit(alt: WsAlternative) -> Node:
    if alt.g > min(alt.mu, alt.median):
        return terminal(alt.mu, tag=(alt.dist.lo, alt.dist.hi))
    return ws_halving_chain(alt, alt.g, min(alt.median, alt.h))


def ws_surrogate_reference(alt: WsAlternative) -> Dist:
    """x -> min(h, max(g, x)) applied to X; the point mass at the mean when g > mu."""
    if alt.g > alt.mu or alt.h is None:
        return point(alt.mu)
    g, h = alt.g, alt.h
    return alt.dist.map(lambda x: min(h, max(g, x)))


def ws_interval_bound(alt: WsAlternative) -> dict:
    """Check water-fill costs of the committed chain against u(x) = kg + 2 min(2mu, max(x, g)).

    Each interval is represented by its conditional mean (the terminal value).
    Returns the number of weigh levels k, whether every interval passes, and
    the ratio alpha = max u(rep) / rho*(x) over atoms x, which feeds the
    quantile check against the clamped reference.
    """
    chain = ws_commit(alt)
    amort = water_fill(chain)
    k = 0
    s = chain
    while not s.is_terminal:
        k += 1
        s = s.actions[0].transitions[0][1]
    g, mu = alt.g, alt.mu
    ref = lambda x: min(alt.h, max(g, x)) if alt.h is not None else mu  # noqa: E731
    ok = True
    worst = 0.0
    for leaf, rho in amort.trajectory_cost.items():
        leaf_node = get_state(chain, leaf)
        lo, hi = leaf_node.tag
        u = k * g + 2 * min(2 * mu, max(leaf_node.value, g))
        if rho > u + EPS * max(1.0, u):
            ok = False
        for x in alt.dist.values:
            if lo <= x <= hi:
                worst = max(worst, u / ref(x))
    return {"k": k, "ok": ok, "alpha": worst, "surrogate": amort.surrogate}


# ---------------------------------------------------------------------------
# optional inspection (maximization)


@dataclass(frozen=True)
class PboiBox:
    dist: Dist
    cost: float

    def __post_init__(self):
        _check_cost(self.cost, "open cost")


@dataclass(frozen=True)
class PboiParams:
    mu: float
    g: float
    h: float
    h_prime: float
    normalized: bool
    box: PboiBox = field(repr=False)


def pboi_params(box: PboiBox) -> PboiParams:
    """Indices g (opening), h' (grab tie), backup h, and normalization.

    A box where opening never pays (g < h') is replaced by the sure box
    ({mu: 1}, 0).  For the remaining boxes h' <= mu <= g and the backup
    index is h = h'.
    """
    D, c = box.dist, box.cost
    mu = D.mean
    degenerate = c > mu
    if not degenerate:
        g = _solve_above(D.values, D.probs, c)
        hp = _solve_below(D.values, D.probs, c)
        degenerate = g < hp - EPS * max(1.0, abs(hp))
    if degenerate:
        return PboiParams(mu, mu, mu, mu, True, PboiBox(point(mu), 0.0))
    return PboiParams(mu, g, min(mu, hp), hp, False, box)


def pboi_surrogates(box: PboiBox) -> dict:
    """W*_o = min(X, g), W*_g = mu and W* = max(W*_o, h) for a box (normalized first)."""
    prm = pboi_params(box)
    D, g, h = prm.box.dist, prm.g, prm.h
    return {
        "open": D.map(lambda x: min(x, g)),
        "grab": point(prm.mu),
        "full": D.map(lambda x: max(min(x, g), h)),
        "params": prm,
    }


def semilocal_alpha(r: float, beta: float) -> tuple[float, bool]:
    """alpha(beta) as a function of r = c / mu; flag marks the r = 1 branch."""
    if r <= 0:
        return 1.0, False
    if r >= 1:
        return 1.0, beta > 0
    denom = 1 + r - beta * r / (1 - r)
    if denom >= 1:
        return 1.0 / denom, False
    return 1.0, False


def pboi_semilocal_rule(box: PboiBox, beta: float) -> dict:
    if beta < 0:
        raise DomainError(f"beta must be nonnegative, got {beta}")
    prm = pboi_params(box)
    mu, c = prm.mu, prm.box.cost
    if mu <= 0:
        return {"alpha": 1.0, "p": 0.0, "flag": False}
    r = c / mu
    alpha, flag = semilocal_alpha(r, beta)
    return {"alpha": alpha, "p": min(1.0, r * alpha), "flag": flag}


def alpha_grid_min(beta: float, n: int = 1000) -> tuple[float, float]:
    """Minimum of alpha(beta) over r = c/mu on the grid {1/n, 2/n, ..., 1}."""
    best = (math.inf, None)
    for i in range(1, n + 1):
        r = i / n
        a, _ = semilocal_alpha(r, beta)
        if a < best[0]:
            best = (a, r)
    return best


def check_semilocal(box: PboiBox, p: float, alpha: float, beta: float) -> bool:
    return semilocal_witness(box, p, alpha, beta) is None


def semilocal_witness(box: PboiBox, p: float, alpha: float, beta: float):
    """A y >= 0 violating the semilocal inequality, or None.

    (1 - p) E[max(W*_o, y)] + p max(mu, y) >= E[max(alpha W*, y)] - p beta mu
    """
    if not 0 <= p <= 1:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    s = pboi_surrogates(box)
    mu = s["params"].mu
    lhs = weighted_sum(
        [(1 - p, curve_of(s["open"], "max")), (p, curve_of(s["grab"], "max"))], constant=p * beta * mu
    )
    rhs = curve_of(s["full"].scale(alpha), "max")
    ok, y = curve_leq(rhs, lhs, lower=0.0)
    return None if ok else y


def build_pboi(box: PboiBox) -> Node:
    """Open (pay c, see X) or grab unopened at the mean.  Sure boxes are terminals."""
    prm = pboi_params(box)
    if prm.normalized or len(box.dist) == 1 and box.cost == 0:
        return terminal(prm.mu)
    return node(
        action("open", box.cost, [(p, terminal(v)) for v, p in box.dist.atoms]),
        action("grab", 0.0, [(1.0, terminal(prm.mu))]),
    )


def pboi_open_chain(box: PboiBox) -> Node:
    prm = pboi_params(box)
    if prm.normalized:
        return terminal(prm.mu)
    return chain_of_dist(prm.box.dist, prm.box.cost, "open")


def pboi_commitment(box: PboiBox, choice: str) -> Node:
    """Chain for a deterministic "open" or "grab" commitment."""
    if choice == "grab":
        return terminal(box.dist.mean)
    if choice == "open":
        return pboi_open_chain(box)
    raise DomainError(f"unknown PBOI action {choice!r}")


__all__ = [
    "PHI",
    "PbpiBox",
    "build_pbpi",
    "pbpi_commitment",
    "pbpi_commit",
    "pbpi_claims",
    "pbpi_phi_partition",
    "AdditiveBox",
    "build_additive",
    "additive_static_chain",
    "additive_static_commit",
    "WsAlternative",
    "build_ws",
    "halving_thresholds",
    "ws_halving_chain",
    "ws_commit",
    "ws_surrogate_reference",
    "ws_interval_bound",
    "PboiBox",
    "PboiParams",
    "pboi_params",
    "pboi_surrogates",
    "semilocal_alpha",
    "pboi_semilocal_rule",
    "alpha_grid_min",
    "check_semilocal",
    "semilocal_witness",
    "build_pboi",
    "pboi_open_chain",
    "pboi_commitment",
]
