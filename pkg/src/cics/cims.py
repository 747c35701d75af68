"""Tree-structured costly-information MDPs, commitments and induced chains.

States are addressed by *paths*: tuples of ``(action index, child index)``
pairs from the root.  The root is ``()``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping

from .dist import EPS_P, Dist
from .errors import CapExceeded, DomainError

Path = tuple


@dataclass(frozen=True, eq=False)
class Action:
    label: str
    cost: float
    transitions: tuple  # of (prob, Node)


@dataclass(frozen=True, eq=False)
class Node:
    """A state.  Terminal iff it has no actions; terminals carry ``value``."""

    value: float | None = None
    actions: tuple = ()
    tag: Any = field(default=None, compare=False)

    @property
    def is_terminal(self) -> bool:
        return not self.actions


def terminal(value: float, tag: Any = None) -> Node:
    return Node(value=float(value), tag=tag)


def action(label: str, cost: float, transitions) -> Action:
    return Action(str(label), float(cost), tuple((float(p), n) for p, n in transitions))


def node(*actions: Action, tag: Any = None) -> Node:
    return Node(actions=tuple(actions), tag=tag)


def chain_of_dist(D: Dist, cost: float, label: str = "open") -> Node:
    """Classical Pandora box: pay ``cost`` once, land on an atom of ``D``."""
    return node(action(label, cost, [(p, terminal(v)) for v, p in D.atoms]))


# ---------------------------------------------------------------------------
# traversal


def iter_states(root: Node) -> Iterator[tuple[Path, Node]]:
    """Preorder walk over (path, node)."""
    stack = [((), root)]
    while stack:
        path, s = stack.pop()
        yield path, s
        kids = []
        for a_idx, act in enumerate(s.actions):
            for k, (_, child) in enumerate(act.transitions):
                kids.append((path + ((a_idx, k),), child))
        stack.extend(reversed(kids))


def get_state(root: Node, path: Path) -> Node:
    s = root
    for a_idx, k in path:
        s = s.actions[a_idx].transitions[k][1]
    return s


def is_chain(root: Node) -> bool:
    return all(len(s.actions) <= 1 for _, s in iter_states(root))


def leaves(root: Node) -> list[tuple[Path, float, float]]:
    """(path, probability, value) for each leaf of a chain."""
    out = []

    def walk(s: Node, path: Path, p: float) -> None:
        if s.is_terminal:
            out.append((path, p, s.value))
            return
        if len(s.actions) != 1:
            raise DomainError(f"state {path} has {len(s.actions)} actions; expected a chain")
        for k, (q, child) in enumerate(s.actions[0].transitions):
            walk(child, path + ((0, k),), p * q)

    walk(root, (), 1.0)
    return out


@dataclass
class Report:
    ok: bool
    errors: list[str]
    horizon: int
    n_states: int
    n_leaves: int


def validate_mdp(root: Node) -> Report:
    errors: list[str] = []
    horizon = 0
    n_states = n_leaves = 0
    for path, s in iter_states(root):
        n_states += 1
        horizon = max(horizon, len(path))
        where = "/".join(f"{a}.{k}" for a, k in path) or "root"
        if s.is_terminal:
            n_leaves += 1
            if s.value is None or not math.isfinite(s.value) or s.value < 0:
                errors.append(f"{where}: terminal needs a finite nonnegative value, got {s.value}")
            continue
        if s.value is not None:
            errors.append(f"{where}: non-terminal state carries a value")
        for act in s.actions:
            if not math.isfinite(act.cost) or act.cost < 0:
                errors.append(f"{where}: action {act.label!r} has invalid cost {act.cost}")
            if not act.transitions:
                errors.append(f"{where}: action {act.label!r} has no transitions")
                continue
            ps = [p for p, _ in act.transitions]
            if any(not p > 0 for p in ps):
                errors.append(f"{where}: action {act.label!r} has a nonpositive transition prob")
            mass = math.fsum(ps)
            if abs(mass - 1) > EPS_P * max(1, len(ps)):
                errors.append(f"{where}: action {act.label!r} transition mass {mass:.12g}")
    return Report(not errors, errors, horizon, n_states, n_leaves)


def check_mdp(root: Node) -> Node:
    rep = validate_mdp(root)
    if not rep.ok:
        raise DomainError("invalid MDP: " + "; ".join(rep.errors))
    return root


# ---------------------------------------------------------------------------
# commitments


@dataclass(frozen=True)
class Commitment:
    """Per-state action distribution keyed by state path.

    ``choice[path]`` is a tuple of probabilities over the actions at that state.
    """

    choice: Mapping[Path, tuple]

    @classmethod
    def deterministic(cls, picks: Mapping[Path, int], root: Node | None = None) -> "Commitment":
        out = {}
        for path, a in picks.items():
            n = len(get_state(root, path).actions) if root is not None else a + 1
            vec = [0.0] * n
            vec[a] = 1.0
            out[path] = tuple(vec)
        return cls(out)

    @property
    def is_deterministic(self) -> bool:
        return all(max(v) == 1.0 for v in self.choice.values())

    def action_at(self, path: Path) -> int:
        vec = self.choice[path]
        if max(vec) != 1.0:
            raise DomainError(f"commitment is randomized at {path}")
        return vec.index(1.0)

    def picks(self) -> dict[Path, int]:
        return {p: self.action_at(p) for p in sorted(self.choice)}


def count_commitments(root: Node) -> int:
    """Number of deterministic commitments over reachable states."""
    if root.is_terminal:
        return 1
    total = 0
    for act in root.actions:
        prod = 1
        for _, child in act.transitions:
            prod *= count_commitments(child)
        total += prod
    return total


def enumerate_commitments(root: Node, cap: int = 10_000) -> list[Commitment]:
    """All deterministic commitments, in lexicographic order of choices."""
    n = count_commitments(root)
    if n > cap:
        raise CapExceeded(f"{n} commitments exceed the cap of {cap}")

    def rec(s: Node, path: Path) -> list[dict]:
        if s.is_terminal:
            return [{}]
        out = []
        for a_idx, act in enumerate(s.actions):
            subs = [rec(child, path + ((a_idx, k),)) for k, (_, child) in enumerate(act.transitions)]
            for combo in itertools.product(*subs):
                d = {path: a_idx}
                for part in combo:
                    d.update(part)
                out.append(d)
        return out

    return [Commitment.deterministic(d, root) for d in rec(root, ())]


def apply_commitment(root: Node, pi: Commitment) -> Node:
    """The chain induced by ``pi``; randomized choices become mixture actions."""

    def rec(s: Node, path: Path) -> Node:
        if s.is_terminal:
            return s
        if path not in pi.choice:
            raise DomainError(f"commitment has no choice at state {path}")
        vec = pi.choice[path]
        if len(vec) != len(s.actions) or abs(math.fsum(vec) - 1) > 1e-9:
            raise DomainError(f"bad action distribution at state {path}: {vec}")
        used = [(w, a_idx) for a_idx, w in enumerate(vec) if w > 0]
        if len(used) == 1:
            a_idx = used[0][1]
            act = s.actions[a_idx]
            trans = [(p, rec(child, path + ((a_idx, k),))) for k, (p, child) in enumerate(act.transitions)]
            return Node(actions=(Action(act.label, act.cost, tuple(trans)),), tag=s.tag)
        trans = []
        for w, a_idx in used:
            act = s.actions[a_idx]
            trans += [(w * p, rec(child, path + ((a_idx, k),))) for k, (p, child) in enumerate(act.transitions)]
        cost = math.fsum(w * s.actions[a].cost for w, a in used)
        label = "+".join(s.actions[a].label for _, a in used)
        return Node(actions=(Action(label, cost, tuple(trans)),), tag=s.tag)

    return rec(root, ())


def trivial_commitment(chain: Node) -> Commitment:
    return Commitment({p: (1.0,) for p, s in iter_states(chain) if not s.is_terminal})


def posterior_means(root: Node) -> dict[Path, float]:
    """v(s) computed from the leaves along the first action of every state."""
    out: dict[Path, float] = {}

    def rec(s: Node, path: Path) -> float:
        if s.is_terminal:
            out[path] = s.value
            return s.value
        vals = []
        for a_idx, act in enumerate(s.actions):
            vals.append(
                math.fsum(p * rec(c, path + ((a_idx, k),)) for k, (p, c) in enumerate(act.transitions))
            )
        out[path] = vals[0]
        return vals[0]

    rec(root, ())
    return out


def martingale_violations(root: Node, tol: float = 1e-9) -> list[Path]:
    """States whose actions disagree on the posterior mean."""
    bad: list[Path] = []

    def rec(s: Node, path: Path) -> float:
        if s.is_terminal:
            return s.value
        vals = [
            math.fsum(p * rec(c, path + ((a_idx, k),)) for k, (p, c) in enumerate(act.transitions))
            for a_idx, act in enumerate(s.actions)
        ]
        if max(vals) - min(vals) > tol * max(1.0, abs(vals[0])):
            bad.append(path)
        return vals[0]

    rec(root, ())
    return bad


def same_structure(a: Node, b: Node, tol: float = 1e-12) -> bool:
    """Structural equality up to float tolerance (labels included)."""
    if a.is_terminal or b.is_terminal:
        return a.is_terminal and b.is_terminal and abs(a.value - b.value) <= tol
    if len(a.actions) != len(b.actions):
        return False
    for x, y in zip(a.actions, b.actions):
        if x.label != y.label or abs(x.cost - y.cost) > tol or len(x.transitions) != len(y.transitions):
            return False
        for (p, c), (q, d) in zip(x.transitions, y.transitions):
            if abs(p - q) > tol or not same_structure(c, d, tol):
                return False
    return True
