"""Shared environment: grid description, weighted transition system, hop
neighborhoods and vertex connectivity."""

from __future__ import annotations

import itertools
import json
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

import networkx as nx

from .errors import EnvironmentSpecError

MOTIONS = ("face6", "full26")

Cell = tuple


@dataclass(frozen=True)
class AgentSpec:
    start: Cell
    formula_index: int


@dataclass
class GridSpec:
    dims: tuple
    obstacles: list = field(default_factory=list)
    regions: dict = field(default_factory=dict)
    agents: list = field(default_factory=list)
    motion: str = "full26"
    weight_default: float = 1.0
    self_loop_weight: float = 1.0
    # {(cell, cell): weight} overrides for individual moves
    edge_weights: dict = field(default_factory=dict)

    @property
    def starts(self) -> list:
        return [a.start for a in self.agents]

    def with_agents(self, agents) -> "GridSpec":
        return GridSpec(self.dims, list(self.obstacles), dict(self.regions), list(agents),
                        self.motion, self.weight_default, self.self_loop_weight,
                        dict(self.edge_weights))


class TransitionSystem:
    """Weighted labeled motion graph shared by all agents.

    ``succ[x]`` maps each successor of ``x`` to the move weight; every state
    carries a self-loop.  ``labels[x]`` is a frozenset of region names.
    """

    def __init__(self, succ: dict, labels: dict, starts: Iterable = ()):
        self.succ = {x: dict(nbrs) for x, nbrs in succ.items()}
        self.labels = {x: frozenset(labels.get(x, ())) for x in self.succ}
        self.starts = list(starts)
        self.states = sorted(self.succ)
        for x, nbrs in self.succ.items():
            if x not in nbrs:
                raise EnvironmentSpecError(f"state {x} lacks a self-loop")
            for y, w in nbrs.items():
                if y not in self.succ:
                    raise EnvironmentSpecError(f"edge {x}->{y} leaves the state set")
                if not 0 < w <= 1:
                    raise EnvironmentSpecError(f"weight {w} of {x}->{y} outside (0,1]")
        for s in self.starts:
            if s not in self.succ:
                raise EnvironmentSpecError(f"start {s} is not a state")
        self._undirected = None

    @classmethod
    def from_edges(cls, edges, labels=None, starts=(), weight=1.0, self_loop_weight=1.0,
                   directed=False):
        """Build from an edge list ``[(u, v)]`` or ``[(u, v, w)]``; self-loops are
        added to every node."""
        succ = {}
        for e in edges:
            u, v = e[0], e[1]
            w = e[2] if len(e) > 2 else weight
            succ.setdefault(u, {})[v] = w
            succ.setdefault(v, {})
            if not directed:
                succ[v][u] = w
        for x in list(succ):
            succ[x].setdefault(x, self_loop_weight)
        for x in labels or {}:
            succ.setdefault(x, {x: self_loop_weight})
        labels = {x: _as_labels(v) for x, v in (labels or {}).items()}
        return cls(succ, labels, starts)

    def __len__(self):
        return len(self.succ)

    @property
    def n_transitions(self) -> int:
        return sum(len(v) for v in self.succ.values())

    def alphabet(self) -> frozenset:
        return frozenset(self.labels.values())

    def undirected(self) -> nx.Graph:
        """Underlying simple undirected graph (self-loops dropped)."""
        if self._undirected is None:
            g = nx.Graph()
            g.add_nodes_from(self.states)
            g.add_edges_from((x, y) for x, nbrs in self.succ.items() for y in nbrs if x != y)
            self._undirected = g
        return self._undirected

    def edges(self):
        for x in self.states:
            for y, w in self.succ[x].items():
                yield x, y, w


def _as_labels(value):
    if value is None or value == "":
        return frozenset()
    if isinstance(value, str):
        return frozenset([value])
    return frozenset(value)


def _offsets(motion):
    if motion == "face6":
        return [d for d in itertools.product((-1, 0, 1), repeat=3) if sum(map(abs, d)) == 1]
    if motion == "full26":
        return [d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)]
    raise EnvironmentSpecError(f"unknown motion model {motion!r}", "motion")


def _inside(cell, dims):
    return len(cell) == 3 and all(0 <= c < n for c, n in zip(cell, dims))


def build_grid(spec: GridSpec) -> TransitionSystem:
    """One state per free cell, moves per the motion model, self-loops
    everywhere, region cells labeled with their region name."""
    dims = tuple(spec.dims)
    if len(dims) != 3 or any(n < 1 for n in dims):
        raise EnvironmentSpecError(f"bad dims {dims}", "dims")
    for w, where in ((spec.weight_default, "weight_default"),
                     (spec.self_loop_weight, "self_loop_weight")):
        if not 0 < w <= 1:
            raise EnvironmentSpecError(f"weight {w} outside (0,1]", where)
    obstacles = set()
    for i, c in enumerate(spec.obstacles):
        c = tuple(c)
        if not _inside(c, dims):
            raise EnvironmentSpecError(f"obstacle {c} outside grid", f"obstacles[{i}]")
        obstacles.add(c)
    labels = {}
    for name, cells in spec.regions.items():
        if not name:
            raise EnvironmentSpecError("empty region name", "regions")
        for i, c in enumerate(cells):
            c = tuple(c)
            where = f"regions.{name}[{i}]"
            if not _inside(c, dims):
                raise EnvironmentSpecError(f"region cell {c} outside grid", where)
            if c in obstacles:
                raise EnvironmentSpecError(f"region cell {c} is an obstacle", where)
            if c in labels and labels[c] != name:
                raise EnvironmentSpecError(f"cell {c} already in region {labels[c]}", where)
            labels[c] = name
    seen = set()
    for i, a in enumerate(spec.agents):
        s = tuple(a.start)
        where = f"agents[{i}].start"
        if not _inside(s, dims):
            raise EnvironmentSpecError(f"start {s} outside grid", where)
        if s in obstacles:
            raise EnvironmentSpecError(f"start {s} is an obstacle", where)
        if s in seen:
            raise EnvironmentSpecError(f"start {s} shared by two agents", where)
        seen.add(s)

    offsets = _offsets(spec.motion)
    succ = {}
    for cell in itertools.product(*(range(n) for n in dims)):
        if cell in obstacles:
            continue
        nbrs = {cell: spec.self_loop_weight}
        for d in offsets:
            nxt = (cell[0] + d[0], cell[1] + d[1], cell[2] + d[2])
            if _inside(nxt, dims) and nxt not in obstacles:
                nbrs[nxt] = spec.edge_weights.get((cell, nxt), spec.weight_default)
        succ[cell] = nbrs
    for (u, v), w in spec.edge_weights.items():
        if u not in succ or v not in succ[u]:
            raise EnvironmentSpecError(f"weight override for non-edge {u}->{v}", "edge_weights")
    if not succ:
        raise EnvironmentSpecError("grid has no free cells", "obstacles")

    ts = TransitionSystem(succ, {c: {n} for c, n in labels.items()}, spec.starts)
    if not nx.is_connected(ts.undirected()):
        raise EnvironmentSpecError("free space is disconnected", "obstacles")
    return ts


def hop_neighborhood(ts: TransitionSystem, x, h: int) -> set:
    """States within ``h`` hops of ``x`` on the undirected motion graph."""
    if h < 0:
        raise ValueError("h must be non-negative")
    if x not in ts.succ:
        raise KeyError(f"unknown state {x}")
    g = ts.undirected()
    seen = {x}
    frontier = deque([(x, 0)])
    while frontier:
        v, d = frontier.popleft()
        if d == h:
            continue
        for u in g[v]:
            if u not in seen:
                seen.add(u)
                frontier.append((u, d + 1))
    return seen


def hop_distances(ts: TransitionSystem, x, cutoff: Optional[int] = None) -> dict:
    return nx.single_source_shortest_path_length(ts.undirected(), x, cutoff=cutoff)


def vertex_connectivity(ts: TransitionSystem) -> int:
    return nx.node_connectivity(ts.undirected())


def check_k_connectivity(ts: TransitionSystem, k: int) -> bool:
    """True iff removing any fewer than ``k`` states leaves the graph connected."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return vertex_connectivity(ts) >= k


# --------------------------------------------------------------------------
# file format

def _cell(value, where, dims=None):
    if (not isinstance(value, (list, tuple)) or len(value) != 3
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)):
        raise EnvironmentSpecError(f"expected an integer triple, got {value!r}", where)
    return tuple(value)


def spec_from_dict(data: dict) -> GridSpec:
    if not isinstance(data, dict):
        raise EnvironmentSpecError("top level must be an object", "$")
    if "dims" not in data:
        raise EnvironmentSpecError("missing required key", "dims")
    dims = _cell(data["dims"], "dims")
    motion = data.get("motion", "full26")
    if motion not in MOTIONS:
        raise EnvironmentSpecError(f"must be one of {MOTIONS}", "motion")
    obstacles = [_cell(c, f"obstacles[{i}]") for i, c in enumerate(data.get("obstacles", []))]
    regions_raw = data.get("regions", {})
    if not isinstance(regions_raw, dict):
        raise EnvironmentSpecError("must be an object", "regions")
    regions = {name: [_cell(c, f"regions.{name}[{i}]") for i, c in enumerate(cells)]
               for name, cells in regions_raw.items()}
    agents = []
    for i, a in enumerate(data.get("agents", [])):
        if not isinstance(a, dict) or "start" not in a:
            raise EnvironmentSpecError("agent needs a start", f"agents[{i}]")
        fi = a.get("formula_index", i)
        if not isinstance(fi, int) or fi < 0:
            raise EnvironmentSpecError("must be a non-negative integer",
                                       f"agents[{i}].formula_index")
        agents.append(AgentSpec(_cell(a["start"], f"agents[{i}].start"), fi))
    weights = {}
    for i, e in enumerate(data.get("edge_weights", [])):
        try:
            weights[(_cell(e["from"], f"edge_weights[{i}].from"),
                     _cell(e["to"], f"edge_weights[{i}].to"))] = float(e["weight"])
        except (KeyError, TypeError):
            raise EnvironmentSpecError("expected {from, to, weight}", f"edge_weights[{i}]") from None
    for key in ("weight_default", "self_loop_weight"):
        if key in data and not isinstance(data[key], (int, float)):
            raise EnvironmentSpecError("must be a number", key)
    return GridSpec(dims=dims, obstacles=obstacles, regions=regions, agents=agents,
                    motion=motion, weight_default=float(data.get("weight_default", 1.0)),
                    self_loop_weight=float(data.get("self_loop_weight", 1.0)),
                    edge_weights=weights)


def spec_to_dict(spec: GridSpec) -> dict:
    out = {
        "dims": list(spec.dims),
        "motion": spec.motion,
        "weight_default": spec.weight_default,
        "self_loop_weight": spec.self_loop_weight,
        "obstacles": [list(c) for c in sorted(map(tuple, spec.obstacles))],
        "regions": {name: [list(c) for c in sorted(map(tuple, cells))]
                    for name, cells in sorted(spec.regions.items())},
        "agents": [{"start": list(a.start), "formula_index": a.formula_index}
                   for a in spec.agents],
    }
    if spec.edge_weights:
        out["edge_weights"] = [{"from": list(u), "to": list(v), "weight": w}
                               for (u, v), w in sorted(spec.edge_weights.items())]
    return out


def dumps_environment(spec: GridSpec) -> str:
    """Normalized text form: fixed key order, sorted cells, one cell per line."""
    d = spec_to_dict(spec)
    text = json.dumps(d, indent=2)
    # keep integer triples on one line
    return re.sub(r"\[\s+(-?\d+),\s+(-?\d+),\s+(-?\d+)\s+\]", r"[\1, \2, \3]", text) + "\n"


def load_environment(path) -> GridSpec:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise EnvironmentSpecError(f"invalid JSON: {exc}", "$") from None
    return spec_from_dict(data)


def save_environment(spec: GridSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_environment(spec))
