"""Matroid selection over many MDPs: index policies, bounds and exact oracles.

Min-mode instances must accept a basis of the matroid and minimize total
cost plus accepted values; max-mode instances keep the accepted set
independent and maximize accepted values minus costs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .amort import water_fill
from .cims import Commitment, Node, apply_commitment, check_mdp, enumerate_commitments, is_chain, iter_states
from .dist import Dist, check_mode
from .errors import CapExceeded, DomainError
from .variants import PboiBox, pboi_open_chain, pboi_params

DEFAULT_CAP = 2_000_000


@dataclass(frozen=True)
class Matroid:
    kind: str
    n: int
    k: int = 0
    blocks: tuple = ()
    caps: tuple = ()
    _block_of: tuple = field(default=(), repr=False, compare=False)

    @classmethod
    def uniform(cls, n: int, k: int) -> "Matroid":
        if n < 0 or k < 0:
            raise DomainError("uniform matroid needs n, k >= 0")
        return cls("uniform", n, min(k, n))

    @classmethod
    def partition(cls, blocks, caps) -> "Matroid":
        blocks = tuple(tuple(sorted(b)) for b in blocks)
        caps = tuple(int(c) for c in caps)
        if len(blocks) != len(caps) or any(c < 0 for c in caps):
            raise DomainError("partition matroid needs one nonnegative capacity per block")
        elems = sorted(e for b in blocks for e in b)
        if elems != list(range(len(elems))):
            raise DomainError("partition blocks must cover 0..n-1 exactly once")
        owner = [0] * len(elems)
        for bi, b in enumerate(blocks):
            for e in b:
                owner[e] = bi
        return cls("partition", len(elems), 0, blocks, caps, tuple(owner))

    def rank_mask(self, mask: int) -> int:
        if self.kind == "uniform":
            return min(bin(mask).count("1"), self.k)
        used = [0] * len(self.blocks)
        for e in range(self.n):
            if mask >> e & 1:
                used[self._block_of[e]] += 1
        return sum(min(u, c) for u, c in zip(used, self.caps))

    def rank(self, S) -> int:
        return self.rank_mask(_mask(S, self.n))

    @property
    def full_rank(self) -> int:
        return self.rank_mask((1 << self.n) - 1)

    def independent_mask(self, mask: int) -> bool:
        return self.rank_mask(mask) == bin(mask).count("1")

    def to_dict(self) -> dict:
        if self.kind == "uniform":
            return {"type": "uniform", "params": {"n": self.n, "k": self.k}}
        return {"type": "partition", "params": {"blocks": [list(b) for b in self.blocks], "caps": list(self.caps)}}


def _mask(S, n: int) -> int:
    m = 0
    for e in S:
        if not 0 <= e < n:
            raise DomainError(f"element {e} outside the ground set of size {n}")
        m |= 1 << e
    return m


def matroid_oracle(m: Matroid, S, i: int) -> dict:
    """Rank facts for adding ``i`` to ``S``; ``independent`` refers to S + {i}."""
    base = _mask(S, m.n)
    if not 0 <= i < m.n:
        raise DomainError(f"element {i} outside the ground set of size {m.n}")
    r = m.rank_mask(base)
    both = base | 1 << i
    return {
        "independent": m.independent_mask(both),
        "rank_S": r,
        "augments": m.rank_mask(both) > r,
    }


def check_matroid_axioms(m: Matroid) -> bool:
    """Exhaustive rank-function check (normalized, monotone, submodular)."""
    if m.n > 12:
        raise CapExceeded("exhaustive matroid check is limited to n <= 12")
    N = 1 << m.n
    r = [m.rank_mask(s) for s in range(N)]
    if r[0] != 0:
        return False
    for a in range(N):
        for e in range(m.n):
            b = a | 1 << e
            if not r[a] <= r[b] <= r[a] + 1:
                return False
        for b in range(N):
            if r[a | b] + r[a & b] > r[a] + r[b]:
                return False
    return True


@dataclass
class Instance:
    mdps: list
    matroid: Matroid
    mode: str = "min"

    def __post_init__(self):
        check_mode(self.mode)
        if len(self.mdps) != self.matroid.n:
            raise DomainError(f"{len(self.mdps)} MDPs but the matroid has {self.matroid.n} elements")


# ---------------------------------------------------------------------------
# compiled MDPs: flat arrays so joint-state recursion is cheap


class _Compiled:
    def __init__(self, root: Node):
        self.nodes: list[Node] = []
        ids = {}
        for _, s in iter_states(root):
            ids[id(s)] = len(self.nodes)
            self.nodes.append(s)
        self.value = [s.value for s in self.nodes]
        self.actions = [
            [(a.label, a.cost, [(p, ids[id(c)]) for p, c in a.transitions]) for a in s.actions]
            for s in self.nodes
        ]
        self.size = len(self.nodes)
        self.index: list[float] | None = None

    def attach_index(self, root: Node, mode: str) -> None:
        amort = water_fill(root, mode)
        by_path = amort.state_index
        self.index = [0.0] * self.size
        for k, (path, _) in enumerate(iter_states(root)):
            self.index[k] = by_path[path]


def _state_space(comps: Sequence[_Compiled], n: int) -> int:
    return math.prod(c.size for c in comps) * (1 << n)


def index_policy_value(chains: Sequence[Node], m: Matroid, mode: str = "min",
                       method="exact", cap: int = DEFAULT_CAP) -> float:
    """Value of the water-filling (min) / water-draining (max) index policy.

    ``method`` is ``"exact"``, ``"auto"`` (exact, Monte Carlo when over the
    cap) or ``("mc", seed, reps)``.
    """
    check_mode(mode)
    if len(chains) != m.n:
        raise DomainError(f"{len(chains)} chains but the matroid has {m.n} elements")
    comps = []
    for ch in chains:
        check_mdp(ch)
        if not is_chain(ch):
            raise DomainError("index policies need chains; apply a commitment first")
        c = _Compiled(ch)
        c.attach_index(ch, mode)
        comps.append(c)
    if method in ("exact", "auto"):
        if _state_space(comps, m.n) <= cap:
            return _index_exact(comps, m, mode)
        if method == "exact":
            raise CapExceeded(f"joint state space exceeds the cap of {cap}")
        method = ("mc", 0, 10_000)
    return _index_mc(comps, m, mode, *_mc_args(method))


def _mc_args(method) -> tuple[int, int]:
    if isinstance(method, (tuple, list)) and len(method) == 3 and method[0] == "mc":
        return int(method[1]), int(method[2])
    raise DomainError(f"unknown method {method!r}")


def _choose(comps, m: Matroid, mode: str, states, S: int):
    """Chain picked by the index rule, or None when the policy stops."""
    n = m.n
    best = None
    if mode == "min":
        r = m.rank_mask(S)
        if r == m.full_rank:
            return None
        for i in range(n):
            if S >> i & 1 or m.rank_mask(S | 1 << i) <= r:
                continue
            g = comps[i].index[states[i]]
            if best is None or g < best[1]:
                best = (i, g)
        return None if best is None else best[0]
    for i in range(n):
        if S >> i & 1 or not m.independent_mask(S | 1 << i):
            continue
        g = comps[i].index[states[i]]
        if best is None or g > best[1]:
            best = (i, g)
    if best is None or best[1] <= 0:
        return None
    return best[0]


def _index_exact(comps, m: Matroid, mode: str) -> float:
    memo: dict = {}
    sign = 1.0 if mode == "min" else -1.0

    def V(states: tuple, S: int) -> float:
        key = (states, S)
        if key in memo:
            return memo[key]
        i = _choose(comps, m, mode, states, S)
        if i is None:
            out = 0.0
        else:
            c = comps[i]
            s = states[i]
            if not c.actions[s]:
                out = c.value[s] + V(states, S | 1 << i)
            else:
                _, cost, trans = c.actions[s][0]
                out = sign * cost + math.fsum(
                    p * V(states[:i] + (t,) + states[i + 1:], S) for p, t in trans
                )
        memo[key] = out
        return out

    return V(tuple(0 for _ in comps), 0)


def _index_mc(comps, m: Matroid, mode: str, seed: int, reps: int) -> float:
    sign = 1.0 if mode == "min" else -1.0
    total = 0.0
    for r in range(reps):
        rng = np.random.default_rng([seed, r])
        states = [0] * len(comps)
        S = 0
        acc = 0.0
        while True:
            i = _choose(comps, m, mode, states, S)
            if i is None:
                break
            c = comps[i]
            s = states[i]
            if not c.actions[s]:
                acc += c.value[s]
                S |= 1 << i
                continue
            _, cost, trans = c.actions[s][0]
            acc += sign * cost
            k = rng.choice(len(trans), p=[p for p, _ in trans])
            states[i] = trans[k][1]
        total += acc
    return total / reps


def _greedy(weights: Sequence[float], m: Matroid, mode: str) -> float:
    order = sorted(range(len(weights)), key=lambda i: weights[i], reverse=(mode == "max"))
    S = 0
    out = 0.0
    for i in order:
        if mode == "min":
            if m.rank_mask(S | 1 << i) > m.rank_mask(S):
                S |= 1 << i
                out += weights[i]
        else:
            if weights[i] <= 0:
                break
            if m.independent_mask(S | 1 << i):
                S |= 1 << i
                out += weights[i]
    return out


def best_feasible_exhaustive(weights: Sequence[float], m: Matroid, mode: str) -> float:
    """Cheapest basis (min) / best independent set (max) by enumerating all subsets."""
    n = len(weights)
    best = math.inf if mode == "min" else 0.0
    for S in range(1 << n):
        w = math.fsum(weights[i] for i in range(n) if S >> i & 1)
        if mode == "min":
            if m.independent_mask(S) and m.rank_mask(S) == m.full_rank and w < best:
                best = w
        elif m.independent_mask(S) and w > best:
            best = w
    return best


def surrogate_bound(dists: Sequence[Dist], m: Matroid, mode: str = "min",
                    method="exact", cap: int = DEFAULT_CAP) -> float:
    """E[optimal feasible sum of independent draws from ``dists``]."""
    check_mode(mode)
    if len(dists) != m.n:
        raise DomainError(f"{len(dists)} distributions but the matroid has {m.n} elements")
    if method == "exact":
        size = math.prod(len(d) for d in dists)
        if size > cap:
            raise CapExceeded(f"{size} joint outcomes exceed the cap of {cap}")
        total = []
        for combo in itertools.product(*(d.atoms for d in dists)):
            p = math.prod(q for _, q in combo)
            total.append(p * _greedy([v for v, _ in combo], m, mode))
        return math.fsum(total)
    seed, reps = _mc_args(method)
    acc = 0.0
    for r in range(reps):
        rng = np.random.default_rng([seed, r])
        draw = [d.values[rng.choice(len(d), p=d.probs)] for d in dists]
        acc += _greedy(draw, m, mode)
    return acc / reps


@dataclass
class OptResult:
    value: float
    root_action: dict


def brute_force_opt(inst: Instance, cap: int = DEFAULT_CAP) -> OptResult:
    """Optimal adaptive policy by backward induction over joint states."""
    m, mode = inst.matroid, inst.mode
    comps = [_Compiled(check_mdp(M)) for M in inst.mdps]
    if _state_space(comps, m.n) > cap:
        raise CapExceeded(f"joint state space exceeds the cap of {cap}")
    memo: dict = {}
    full = m.full_rank

    sign = 1.0 if mode == "min" else -1.0

    def solve(states: tuple, S: int):
        r = m.rank_mask(S)
        if mode == "min" and r == full:
            return 0.0, None
        best_v, best_a = (math.inf, None) if mode == "min" else (0.0, ("stop",))
        for i, c in enumerate(comps):
            if S >> i & 1:
                continue
            grown = S | 1 << i
            if mode == "min" and m.rank_mask(grown) <= r:
                continue
            if mode == "max" and not m.independent_mask(grown):
                continue
            s = states[i]
            if not c.actions[s]:
                cands = [("accept", c.value[s] + V(states, grown))]
            else:
                cands = [
                    (label, sign * cost + math.fsum(
                        p * V(states[:i] + (t,) + states[i + 1:], S) for p, t in trans))
                    for label, cost, trans in c.actions[s]
                ]
            for label, v in cands:
                if (mode == "min" and v < best_v - 1e-15) or (mode == "max" and v > best_v + 1e-15):
                    best_v, best_a = v, (i, label)
        if best_a is None:
            raise DomainError("no feasible way to complete a basis")
        return best_v, best_a

    def V(states: tuple, S: int) -> float:
        key = (states, S)
        if key not in memo:
            memo[key] = solve(states, S)[0]
        return memo[key]

    start = tuple(0 for _ in comps)
    value, act = solve(start, 0)
    if act is None:
        desc = {"action": "done"}
    elif act[0] == "stop":
        desc = {"action": "stop"}
    else:
        desc = {"mdp": act[0], "action": act[1]}
    return OptResult(value, desc)


@dataclass
class GapResult:
    gap: float
    best: tuple
    best_value: float
    opt: float


def commitment_gap(inst: Instance, cap: int = 10_000, opt_cap: int = DEFAULT_CAP) -> GapResult:
    """Best deterministic commitment tuple relative to the unrestricted optimum."""
    per = [enumerate_commitments(M, cap) for M in inst.mdps]
    total = math.prod(len(p) for p in per)
    if total > cap:
        raise CapExceeded(f"{total} commitment tuples exceed the cap of {cap}")
    opt = brute_force_opt(inst, opt_cap).value
    chains = [[apply_commitment(M, pi) for pi in ps] for M, ps in zip(inst.mdps, per)]
    best = None
    for combo in itertools.product(*(range(len(p)) for p in per)):
        sub = Instance([chains[i][j] for i, j in enumerate(combo)], inst.matroid, inst.mode)
        v = brute_force_opt(sub, opt_cap).value
        better = best is None or (v < best[0] - 1e-12 if inst.mode == "min" else v > best[0] + 1e-12)
        if better:
            best = (v, combo)
    v, combo = best
    if opt == 0:
        gap = 1.0 if v == 0 else math.inf
    else:
        gap = v / opt
    return GapResult(gap, tuple(per[i][j] for i, j in enumerate(combo)), v, opt)


def semilocal_compose(boxes: Sequence[PboiBox], m: Matroid, probs: Sequence[float],
                      method="exact") -> float:
    """Randomly commit some boxes to grabbing, then run the max index policy.

    Boxes are visited by decreasing mean (stable); box i is grabbed when its
    coin (probability ``probs[i]``) lands heads and the grabbed set stays
    independent.  Every other box must be opened before it can be selected.
    """
    n = len(boxes)
    if n != m.n or len(probs) != n:
        raise DomainError("need one box and one probability per matroid element")
    if any(not 0 <= p <= 1 for p in probs):
        raise DomainError("grab probabilities must lie in [0, 1]")
    params = [pboi_params(b) for b in boxes]
    order = sorted(range(n), key=lambda i: -params[i].mu)
    grab_chain = [Node(value=prm.mu) for prm in params]
    open_chain = [pboi_open_chain(prm.box) for prm in params]
    cache: dict = {}

    def value_for(coins) -> float:
        S = 0
        for i in order:
            if coins[i] and m.independent_mask(S | 1 << i):
                S |= 1 << i
        if S not in cache:
            chains = [grab_chain[i] if S >> i & 1 else open_chain[i] for i in range(n)]
            cache[S] = index_policy_value(chains, m, "max")
        return cache[S]

    if method == "exact":
        if n > 20:
            raise CapExceeded("exact composition enumerates 2^n coin outcomes; n <= 20")
        acc = []
        for coins in itertools.product((0, 1), repeat=n):
            w = math.prod(probs[i] if coins[i] else 1 - probs[i] for i in range(n))
            if w > 0:
                acc.append(w * value_for(coins))
        return math.fsum(acc)
    seed, reps = _mc_args(method)
    total = 0.0
    for r in range(reps):
        rng = np.random.default_rng([seed, r])
        coins = tuple(int(rng.random() < p) for p in probs)
        total += value_for(coins)
    return total / reps


def chains_for(mdps: Sequence[Node], commitments: Sequence[Commitment]) -> list[Node]:
    return [apply_commitment(M, pi) for M, pi in zip(mdps, commitments)]
