"""Cost amortization for chains and surrogate costs for general MDPs.

Min-mode uses water filling: each state's cost is spread over the cheapest
downstream trajectories first.  Max-mode uses water draining: the cost is
taken from the most valuable trajectories first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .cims import Commitment, Node, Path, check_mdp, iter_states
from .curve import (
    Curve,
    StochasticMap,
    combine,
    curve_of,
    dist_of,
    identity_curve,
    sdom_map,
    weighted_sum,
)
from .dist import Dist, DomainError, _solve_above, _solve_below, check_mode, mixture, point


@dataclass
class Amortization:
    mode: str
    water_level: dict       # state path -> g
    state_index: dict       # state path -> I*(s)
    trajectory_cost: dict   # leaf path -> rho(tau)
    leaf_prob: dict         # leaf path -> p(tau)
    shares: dict            # (state path, leaf path) -> b
    surrogate: Dist

    @property
    def index(self) -> float:
        return self.state_index[()]


def _level(pairs: list[tuple[float, float]], c: float, mode: str) -> float:
    """Water level for (cost, conditional prob) pairs and per-state cost c."""
    pairs = sorted(pairs)
    vals = [v for v, _ in pairs]
    ps = [q for _, q in pairs]
    if mode == "min":
        return _solve_below(vals, ps, c)
    return _solve_above(vals, ps, c)


def water_fill(chain: Node, mode: str = "min") -> Amortization:
    """Amortize every action cost of ``chain`` onto its trajectories."""
    check_mode(mode)
    check_mdp(chain)
    levels: dict = {}
    shares: dict = {}
    rho: dict = {}
    lprob: dict = {}

    def rec(s: Node, path: Path, p: float) -> list[tuple[Path, float]]:
        # returns (leaf, conditional prob) for the subtree; rho holds current costs
        if s.is_terminal:
            rho[path] = s.value
            lprob[path] = p
            return [(path, 1.0)]
        if len(s.actions) != 1:
            raise DomainError(f"state {path} has {len(s.actions)} actions; water filling needs a chain")
        act = s.actions[0]
        under: list[tuple[Path, float]] = []
        for k, (q, child) in enumerate(act.transitions):
            under += [(leaf, q * r) for leaf, r in rec(child, path + ((0, k),), p * q)]
        g = _level([(rho[leaf], r) for leaf, r in under], act.cost, mode)
        levels[path] = g
        for leaf, _ in under:
            if mode == "min":
                shares[(path, leaf)] = max(g - rho[leaf], 0.0)
                rho[leaf] = max(g, rho[leaf])
            else:
                shares[(path, leaf)] = max(rho[leaf] - g, 0.0)
                rho[leaf] = min(g, rho[leaf])
        return under

    rec(chain, (), 1.0)
    pick = min if mode == "min" else max
    index: dict = {}
    for leaf, v in rho.items():
        for d in range(len(leaf) + 1):
            pre = leaf[:d]
            index[pre] = pick(index.get(pre, v), v)
    surrogate = Dist.from_atoms((rho[leaf], lprob[leaf]) for leaf in rho)
    return Amortization(mode, levels, index, dict(rho), lprob, shares, surrogate)


def _action_curve(act, child_curves: list[Curve], mode: str) -> Curve:
    sign = 1.0 if mode == "min" else -1.0
    terms = [(q, f) for (q, _), f in zip(act.transitions, child_curves)]
    return weighted_sum(terms, constant=sign * act.cost)


def mdp_curve(M: Node, mode: str = "min", _memo: dict | None = None) -> Curve:
    """Optimality curve of the local game against outside option y."""
    check_mode(mode)
    memo = {} if _memo is None else _memo

    def rec(s: Node) -> Curve:
        key = id(s)
        if key in memo:
            return memo[key]
        if s.is_terminal:
            f = curve_of(point(s.value), mode)
        else:
            parts = [identity_curve(mode)]
            for act in s.actions:
                parts.append(_action_curve(act, [rec(c) for _, c in act.transitions], mode))
            f = combine(parts)
        memo[key] = f
        return f

    if _memo is None:
        check_mdp(M)
    return rec(M)


def mdp_surrogate(M: Node, mode: str = "min") -> Dist:
    return dist_of(mdp_curve(M, mode))


@dataclass
class Decomposition:
    per_leaf: dict      # leaf path (in M) -> Dist of rho^pi(tau)
    leaf_prob: dict     # leaf path -> p(tau) under pi
    shares: dict        # (state path, leaf path) -> b
    surrogate: Dist     # W*_M

    def mixed(self) -> Dist:
        return mixture([(self.leaf_prob[t], d) for t, d in self.per_leaf.items()])


class Decomposer:
    """Caches curves and transport maps so many commitments can share them."""

    def __init__(self, M: Node, mode: str = "min"):
        self.M = check_mdp(M)
        self.mode = check_mode(mode)
        self._curves: dict = {}
        mdp_curve(M, mode, self._curves)
        self._surr: dict = {}
        self._step: dict = {}

    def surrogate(self, s: Node) -> Dist:
        key = id(s)
        if key not in self._surr:
            self._surr[key] = dist_of(self._curves[key])
        return self._surr[key]

    def step(self, s: Node, j: int) -> tuple[float, StochasticMap]:
        key = (id(s), j)
        if key not in self._step:
            act = s.actions[j]
            Z = mixture([(q, self.surrogate(c)) for q, c in act.transitions])
            if self.mode == "min":
                g = _solve_below(Z.values, Z.probs, act.cost)
                Zhat = Z.map(lambda x: max(g, x))
            else:
                g = _solve_above(Z.values, Z.probs, act.cost)
                Zhat = Z.map(lambda x: min(g, x))
            self._step[key] = (g, sdom_map(self.surrogate(s), Zhat, self.mode))
        return self._step[key]

    def run(self, pi: Commitment) -> Decomposition:
        if not pi.is_deterministic:
            raise DomainError("decomposition is defined for deterministic commitments only")
        per_leaf: dict = {}
        shares: dict = {}
        lprob: dict = {}
        clamp = max if self.mode == "min" else min

        def rec(s: Node, path: Path, p: float) -> dict:
            if s.is_terminal:
                lprob[path] = p
                return {path: point(s.value)}
            j = pi.action_at(path)
            g, m = self.step(s, j)
            out = {}
            for k, (q, child) in enumerate(s.actions[j].transitions):
                for leaf, d in rec(child, path + ((j, k),), p * q).items():
                    new = m.apply(d.map(lambda x: clamp(g, x)))
                    b = new.mean - d.mean if self.mode == "min" else d.mean - new.mean
                    shares[(path, leaf)] = b
                    out[leaf] = new
            return out

        per_leaf = rec(self.M, (), 1.0)
        return Decomposition(per_leaf, lprob, shares, self.surrogate(self.M))


def decompose(M: Node, pi: Commitment, mode: str = "min") -> Decomposition:
    """Action-independent per-trajectory surrogate costs under commitment ``pi``."""
    return Decomposer(M, mode).run(pi)


def leaf_values(M: Node) -> dict:
    """Terminal value for every leaf path of ``M``."""
    return {p: s.value for p, s in iter_states(M) if s.is_terminal}
