"""Seeded random instance generators shared by the property and acceptance tests.

Values sit on a half-integer grid and probabilities on a 1/8 grid so that
exact comparisons stay meaningful and commitment spaces stay small.
"""

from __future__ import annotations

import numpy as np

from cics import Dist, Matroid, action, count_commitments, make_dist, node, terminal
from cics.variants import PbpiBox, PboiBox, WsAlternative


def probs(rng: np.random.Generator, n: int, grid: int = 8) -> list[float]:
    if n == 1:
        return [1.0]
    cuts = np.sort(rng.choice(np.arange(1, grid), size=n - 1, replace=False))
    parts = np.diff(np.concatenate([[0], cuts, [grid]]))
    return [float(x) / grid for x in parts]


def dist(rng, max_atoms: int = 4, lo: float = 0.0, hi: float = 10.0, step: float = 0.5) -> Dist:
    n = int(rng.integers(1, max_atoms + 1))
    grid = np.arange(lo, hi + step / 2, step)
    vals = rng.choice(grid, size=min(n, len(grid)), replace=False)
    return make_dist(zip(map(float, vals), probs(rng, len(vals))))


def cost(rng, hi: float = 3.0) -> float:
    return float(rng.integers(0, int(hi * 4) + 1)) / 4


def chain(rng, depth: int = 3, branching: int = 3):
    if depth == 0 or rng.random() < 0.25:
        return terminal(float(rng.integers(0, 21)) / 2)
    k = int(rng.integers(1, branching + 1))
    kids = [chain(rng, depth - 1, branching) for _ in range(k)]
    return node(action("a", cost(rng), list(zip(probs(rng, k), kids))))


def mdp(rng, depth: int = 3, branching: int = 3, actions: int = 3, max_commitments: int = 400):
    def rec(d: int):
        if d == 0 or (d < depth and rng.random() < 0.3):
            return terminal(float(rng.integers(0, 21)) / 2)
        acts = []
        for j in range(int(rng.integers(1, actions + 1))):
            k = int(rng.integers(1, branching + 1))
            kids = [rec(d - 1) for _ in range(k)]
            acts.append(action(f"a{j}", cost(rng), list(zip(probs(rng, k), kids))))
        return node(*acts)

    while True:
        M = rec(depth)
        if count_commitments(M) <= max_commitments:
            return M


def uniform_matroid(rng, n: int) -> Matroid:
    return Matroid.uniform(n, int(rng.integers(1, n + 1)))


def pbpi_box(rng, max_atoms: int = 5) -> PbpiBox:
    D = dist(rng, max_atoms)
    c_open = float(rng.integers(1, 13)) / 4
    c_peek = c_open * float(rng.integers(1, 8)) / 8
    return PbpiBox(D, c_open, c_peek)


def pboi_box(rng, max_atoms: int = 3) -> PboiBox:
    D = dist(rng, max_atoms, lo=0.0, hi=10.0)
    return PboiBox(D, float(rng.integers(0, 13)) / 4)


def ws_alternative(rng, max_atoms: int = 8) -> WsAlternative:
    D = dist(rng, max_atoms, lo=0.0, hi=20.0)
    return WsAlternative(D, float(rng.integers(1, 9)) / 8)
