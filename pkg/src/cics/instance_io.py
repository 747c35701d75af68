"""JSON instance files: parsing, canonical serialization, alternative builders."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

from .amort import water_fill
from .cims import (
    Commitment,
    Node,
    action,
    apply_commitment,
    chain_of_dist,
    enumerate_commitments,
    get_state,
    node,
    terminal,
)
from .dist import DomainError, make_dist
from .errors import ParseError
from .selection import Instance, Matroid
from .variants import (
    AdditiveBox,
    PbpiBox,
    PboiBox,
    WsAlternative,
    additive_static_chain,
    additive_static_commit,
    build_additive,
    build_pbpi,
    build_pboi,
    build_ws,
    pbpi_commit,
    pbpi_commitment,
    pboi_commitment,
    pboi_params,
    ws_commit,
)

SCHEMA_VERSION = 1
KINDS = ("mdp", "pb", "pbpi", "additive", "ws", "pboi")


def _round12(obj: Any) -> Any:
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise DomainError("non-finite number cannot be serialized")
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {str(k): _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj: Any) -> str:
    """Sorted keys, 12 significant digits, two-space indent, trailing newline."""
    return json.dumps(_round12(obj), sort_keys=True, indent=2) + "\n"


def _need(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise ParseError(f"{where}: missing field {key!r}")
    return d[key]


def _num(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError(f"{where}: expected a number, got {x!r}")
    return float(x)


def _dist(spec, where: str):
    if not isinstance(spec, list) or not spec:
        raise ParseError(f"{where}: dist must be a nonempty list of [value, prob]")
    pairs = []
    for k, item in enumerate(spec):
        if not isinstance(item, list) or len(item) != 2:
            raise ParseError(f"{where}[{k}]: expected [value, prob]")
        pairs.append((_num(item[0], where), _num(item[1], where)))
    return make_dist(pairs)


def parse_tree(spec, where: str = "tree") -> Node:
    if not isinstance(spec, dict):
        raise ParseError(f"{where}: node must be an object")
    if "value" in spec:
        if "actions" in spec:
            raise ParseError(f"{where}: a node has either a value or actions")
        return terminal(_num(spec["value"], where))
    acts = _need(spec, "actions", where)
    if not isinstance(acts, list) or not acts:
        raise ParseError(f"{where}: actions must be a nonempty list")
    out = []
    for j, a in enumerate(acts):
        w = f"{where}.actions[{j}]"
        trans = _need(a, "transitions", w)
        if not isinstance(trans, list) or not trans:
            raise ParseError(f"{w}: transitions must be a nonempty list")
        pairs = []
        for k, t in enumerate(trans):
            if not isinstance(t, list) or len(t) != 2:
                raise ParseError(f"{w}.transitions[{k}]: expected [prob, node]")
            pairs.append((_num(t[0], w), parse_tree(t[1], f"{w}.transitions[{k}]")))
        out.append(action(str(a.get("label", f"a{j}")), _num(_need(a, "cost", w), w), pairs))
    return node(*out)


def tree_to_json(s: Node) -> dict:
    if s.is_terminal:
        return {"value": s.value}
    return {
        "actions": [
            {"label": a.label, "cost": a.cost, "transitions": [[p, tree_to_json(c)] for p, c in a.transitions]}
            for a in s.actions
        ]
    }


@dataclass
class Alternative:
    kind: str
    spec: dict
    mdp: Node
    obj: Any = None  # the variant object (box/alternative) when there is one

    def default_chain(self, mode: str) -> Node:
        """Chain under the variant's own commitment rule."""
        k = self.kind
        if k == "pb":
            return self.mdp
        if k == "pbpi":
            return apply_commitment(self.mdp, pbpi_commitment(self.obj, pbpi_commit(self.obj)["action"]))
        if k == "additive":
            return additive_static_chain(self.obj, additive_static_commit(self.obj)["ordering"])
        if k == "ws":
            return ws_commit(self.obj)
        if k == "pboi":
            prm = pboi_params(self.obj)
            return pboi_commitment(prm.box, "open")
        # generic tree: the commitment whose chain has the best root index
        best = None
        for pi in enumerate_commitments(self.mdp):
            ch = apply_commitment(self.mdp, pi)
            g = water_fill(ch, mode).index
            if best is None or (g < best[0] if mode == "min" else g > best[0]):
                best = (g, ch)
        return best[1]

    def chain_for(self, choice, mode: str) -> Node:
        """Chain for an explicit commitment choice (format depends on the kind)."""
        if choice is None:
            return self.default_chain(mode)
        k = self.kind
        if k == "pbpi":
            return apply_commitment(self.mdp, pbpi_commitment(self.obj, str(choice)))
        if k == "additive":
            return additive_static_chain(self.obj, choice)
        if k == "pboi":
            return pboi_commitment(pboi_params(self.obj).box, str(choice))
        if k == "ws":
            if choice == "none":
                return terminal(self.obj.mu)
            if choice == "halving":
                return ws_commit(self.obj)
            raise ParseError(f"unknown weighing commitment {choice!r}")
        if k == "pb":
            return self.mdp
        if isinstance(choice, bool) or not isinstance(choice, int):
            raise ParseError("an mdp commitment is an index into the enumerated commitments")
        pis = enumerate_commitments(self.mdp)
        if not 0 <= choice < len(pis):
            raise ParseError(f"commitment index {choice} out of range (0..{len(pis) - 1})")
        return apply_commitment(self.mdp, pis[choice])


def build_alternative(spec: dict, where: str) -> Alternative:
    kind = _need(spec, "type", where)
    if kind not in KINDS:
        raise ParseError(f"{where}: unknown alternative type {kind!r}")
    if kind == "mdp":
        return Alternative(kind, spec, parse_tree(_need(spec, "tree", where), f"{where}.tree"))
    if kind == "additive":
        comps = _need(spec, "components", where)
        if not isinstance(comps, list) or not comps:
            raise ParseError(f"{where}: components must be a nonempty list")
        box = AdditiveBox(tuple(
            (_dist(_need(c, "dist", f"{where}.components[{j}]"), f"{where}.components[{j}]"),
             _num(_need(c, "cost", f"{where}.components[{j}]"), where))
            for j, c in enumerate(comps)
        ))
        return Alternative(kind, spec, build_additive(box), box)
    D = _dist(_need(spec, "dist", where), f"{where}.dist")
    if kind == "pb":
        return Alternative(kind, spec, chain_of_dist(D, _num(_need(spec, "cost", where), where)))
    if kind == "pbpi":
        box = PbpiBox(D, _num(_need(spec, "open_cost", where), where), _num(_need(spec, "peek_cost", where), where))
        return Alternative(kind, spec, build_pbpi(box), box)
    if kind == "ws":
        alt = WsAlternative(D, _num(_need(spec, "cost", where), where))
        return Alternative(kind, spec, build_ws(alt, spec.get("thresholds")), alt)
    box = PboiBox(D, _num(_need(spec, "cost", where), where))
    return Alternative(kind, spec, build_pboi(box), box)


def parse_matroid(spec, n: int) -> Matroid:
    kind = _need(spec, "type", "matroid")
    params = spec.get("params", {})
    if kind == "uniform":
        m = Matroid.uniform(int(params.get("n", n)), int(_need(params, "k", "matroid.params")))
    elif kind == "partition":
        m = Matroid.partition(_need(params, "blocks", "matroid.params"), _need(params, "caps", "matroid.params"))
    else:
        raise ParseError(f"unknown matroid type {kind!r}")
    if m.n != n:
        raise ParseError(f"matroid has {m.n} elements but there are {n} alternatives")
    return m


@dataclass
class InstanceFile:
    raw: dict
    mode: str
    matroid: Matroid
    alternatives: list

    def instance(self) -> Instance:
        return Instance([a.mdp for a in self.alternatives], self.matroid, self.mode)


def parse_instance(raw: dict) -> InstanceFile:
    if not isinstance(raw, dict):
        raise ParseError("instance must be a JSON object")
    version = _need(raw, "schema_version", "instance")
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
    mode = _need(raw, "mode", "instance")
    if mode not in ("min", "max"):
        raise ParseError(f"mode must be 'min' or 'max', got {mode!r}")
    alts = _need(raw, "alternatives", "instance")
    if not isinstance(alts, list):
        raise ParseError("alternatives must be a list")
    built = [build_alternative(a, f"alternatives[{i}]") for i, a in enumerate(alts)]
    return InstanceFile(raw, mode, parse_matroid(_need(raw, "matroid", "instance"), len(built)), built)


def load_instance(path: str) -> InstanceFile:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_instance(raw)


def commitment_to_json(M: Node, pi: Commitment) -> dict:
    """Readable form of a deterministic commitment: state path -> action label."""
    out = {}
    for path, a in pi.picks().items():
        key = "/".join(f"{x}.{k}" for x, k in path) or "root"
        out[key] = get_state(M, path).actions[a].label
    return out


def _alt_to_json(a: Alternative) -> dict:
    k = a.kind
    if k == "mdp":
        return {"type": k, "tree": tree_to_json(a.mdp)}
    if k == "pb":
        act = a.mdp.actions[0]
        return {"type": k, "dist": [[c.value, p] for p, c in act.transitions], "cost": act.cost}
    if k == "pbpi":
        return {"type": k, "dist": a.obj.dist.to_pairs(), "open_cost": a.obj.open_cost, "peek_cost": a.obj.peek_cost}
    if k == "additive":
        return {"type": k, "components": [{"dist": D.to_pairs(), "cost": c} for D, c in a.obj.components]}
    out = {"type": k, "dist": a.obj.dist.to_pairs(), "cost": a.obj.cost}
    if k == "ws" and a.spec.get("thresholds") is not None:
        out["thresholds"] = [float(t) for t in a.spec["thresholds"]]
    return out


def instance_to_json(inst: InstanceFile) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "mode": inst.mode,
        "matroid": inst.matroid.to_dict(),
        "alternatives": [_alt_to_json(a) for a in inst.alternatives],
    }


def dumps_instance(inst: InstanceFile) -> str:
    return canonical_json(instance_to_json(inst))
