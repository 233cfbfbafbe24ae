"""Product of the transition system with a relaxed automaton, and the energy
function (weighted distance to acceptance) over its states."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field

from .automaton import Dfsa, dfsa_step
from .environment import TransitionSystem
from .errors import AlphabetError, MissionInfeasible

INF = math.inf


@dataclass
class ProductAutomaton:
    """Reachable part of ``T x A``.  States are ``(ts_state, dfa_state)`` pairs;
    ``succ[p]`` maps successors to the weight of the underlying move."""

    initial: tuple
    succ: dict
    accepting: frozenset
    dfa: Dfsa = field(repr=False, default=None)

    @property
    def states(self):
        return self.succ.keys()

    def __len__(self):
        return len(self.succ)

    @property
    def n_transitions(self) -> int:
        return sum(len(v) for v in self.succ.values())

    def predecessors(self) -> dict:
        preds = {p: {} for p in self.succ}
        for p, nbrs in self.succ.items():
            for q, w in nbrs.items():
                preds[q][p] = w
        return preds

    def to_text(self, energy=None) -> str:
        """Edge list ``src<TAB>dst<TAB>weight`` with optional energy lines."""
        lines = [f"# initial {_fmt(self.initial)}",
                 f"# accepting {len(self.accepting)}"]
        for p in sorted(self.succ):
            for q, w in sorted(self.succ[p].items()):
                lines.append(f"{_fmt(p)}\t{_fmt(q)}\t{w:g}")
        if energy is not None:
            lines.append("# energy")
            for p in sorted(energy):
                lines.append(f"{_fmt(p)}\t{energy[p]:g}")
        return "\n".join(lines) + "\n"


def _fmt(p):
    x, s = p
    return f"{','.join(map(str, x))}|{s}"


def initial_product_state(ts: TransitionSystem, aut: Dfsa, x0):
    """The first observation ``l(x0)`` is consumed when entering the product."""
    s0 = dfsa_step(aut, aut.initial, ts.labels[x0])
    return None if s0 is None else (x0, s0)


def build_product(ts: TransitionSystem, aut: Dfsa, x0) -> ProductAutomaton:
    """Materialize the product reachable from ``(x0, delta(s0, l(x0)))``.

    ``((x, s), (x', s'))`` is a transition iff ``(x, x')`` is a move of ``ts``
    and ``delta(s, l(x')) = s'``; it carries the weight of the move.
    """
    if x0 not in ts.succ:
        raise KeyError(f"unknown start state {x0}")
    missing = set(ts.labels.values()) - aut.alphabet
    if missing:
        raise AlphabetError(f"labels {[sorted(m) for m in missing]} not in automaton alphabet")
    p0 = initial_product_state(ts, aut, x0)
    if p0 is None:
        # no word starting with l(x0) is accepted; keep a dead initial state
        p0 = (x0, None)
        return ProductAutomaton(p0, {p0: {}}, frozenset(), aut)
    succ = {p0: {}}
    queue = deque([p0])
    trans = aut.transitions
    labels = ts.labels
    while queue:
        p = queue.popleft()
        x, s = p
        out = succ[p]
        for y, w in ts.succ[x].items():
            t = trans.get((s, labels[y]))
            if t is None:
                continue
            q = (y, t)
            out[q] = w
            if q not in succ:
                succ[q] = {}
                queue.append(q)
    accepting = frozenset(p for p in succ if p[1] in aut.accepting)
    return ProductAutomaton(p0, succ, accepting, aut)


def compute_energy(prod: ProductAutomaton) -> dict:
    """Weighted distance from every state to the nearest accepting state
    (Dijkstra from all accepting states over reversed edges); ``inf`` when no
    accepting state is reachable."""
    preds = prod.predecessors()
    dist = {p: INF for p in prod.succ}
    heap = []
    for p in prod.accepting:
        dist[p] = 0.0
        heap.append((0.0, p))
    heapq.heapify(heap)
    done = set()
    while heap:
        d, q = heapq.heappop(heap)
        if q in done:
            continue
        done.add(q)
        for p, w in preds[q].items():
            nd = d + w
            if nd < dist[p]:
                dist[p] = nd
                heapq.heappush(heap, (nd, p))
    return dist


def prune_infinite(prod: ProductAutomaton, energy: dict) -> ProductAutomaton:
    """Drop infinite-energy states and their transitions.

    Raises :class:`MissionInfeasible` if the initial state itself is dropped.
    """
    if energy.get(prod.initial, INF) == INF:
        raise MissionInfeasible(None, "no accepting product state is reachable from the start")
    keep = {p for p in prod.succ if energy[p] < INF}
    succ = {p: {q: w for q, w in prod.succ[p].items() if q in keep} for p in keep}
    return ProductAutomaton(prod.initial, succ, prod.accepting & keep, prod.dfa)


def project_to_ts(path) -> list:
    """First components of a product path."""
    return [p[0] for p in path]


def shortest_accepting_path(prod: ProductAutomaton, energy: dict, start=None) -> list:
    """Energy-descent path from ``start`` (default: initial) to acceptance,
    choosing the smallest successor among equally good ones."""
    p = prod.initial if start is None else start
    if energy[p] == INF:
        raise MissionInfeasible(None)
    path = [p]
    while p not in prod.accepting:
        p = min((energy[q] + w, q) for q, w in prod.succ[p].items())[1]
        path.append(p)
    return path
