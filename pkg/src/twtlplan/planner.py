"""Per-agent online planning: priorities, conflict sets and the receding
horizon search over the agent's product automaton."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .errors import NoSafePath
from .product import ProductAutomaton


@dataclass
class AgentContext:
    agent_id: int
    product: ProductAutomaton
    energy: dict
    current: tuple
    horizon: int = 1
    satisfied: bool = False
    committed: list = field(default_factory=list)
    formula: object = None
    _succ_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.committed:
            self.committed = [self.current]
        self.satisfied = self.satisfied or self.current in self.product.accepting

    @property
    def position(self):
        return self.current[0]

    @property
    def current_energy(self) -> float:
        return 0.0 if self.satisfied else self.energy[self.current]

    def successors(self, p) -> list:
        """``(q, ts_state, energy)`` for each successor, in state order."""
        out = self._succ_cache.get(p)
        if out is None:
            out = [(q, q[0], self.energy[q]) for q in sorted(self.product.succ[p])]
            self._succ_cache[p] = out
        return out


@dataclass(frozen=True)
class PriorityOrder:
    """Neighborhood agents from highest to lowest priority."""

    order: tuple
    energies: Mapping
    higher: frozenset  # agents strictly above the requesting agent

    def rank(self, agent_id) -> int:
        return self.order.index(agent_id)


def priority_key(energy, satisfied, tie):
    # satisfied agents rank below every unsatisfied one
    return (bool(satisfied), 0.0 if satisfied else energy, tie)


def assign_priorities(agent_id, neighbors: Iterable, tie_keys: Optional[Mapping] = None
                      ) -> PriorityOrder:
    """Order ``neighbors`` (``(id, energy, satisfied)`` triples, self included)
    by energy; ties go to the smaller tie key (default: the agent id)."""
    if hasattr(agent_id, "agent_id"):
        agent_id = agent_id.agent_id
    neighbors = list(neighbors)
    ids = [n[0] for n in neighbors]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate agent ids in {ids}")
    if agent_id not in ids:
        raise ValueError(f"agent {agent_id} missing from its own neighborhood")
    tie_keys = tie_keys or {}
    keyed = sorted(neighbors, key=lambda n: priority_key(n[1], n[2], tie_keys.get(n[0], n[0])))
    order = tuple(n[0] for n in keyed)
    pos = order.index(agent_id)
    return PriorityOrder(order, {n[0]: n[1] for n in neighbors}, frozenset(order[:pos]))


@dataclass
class ConflictSet:
    """Forbidden TS states and TS moves, keyed by hop ``1..H``."""

    states: dict = field(default_factory=dict)
    moves: dict = field(default_factory=dict)

    def forbid_state(self, h, x):
        self.states.setdefault(h, set()).add(x)

    def forbid_move(self, h, x, y):
        self.moves.setdefault(h, set()).add((x, y))

    def allows(self, h, x, y) -> bool:
        return y not in self.states.get(h, ()) and (x, y) not in self.moves.get(h, ())

    def is_empty(self) -> bool:
        return not any(self.states.values()) and not any(self.moves.values())


@dataclass(frozen=True)
class HorizonPath:
    states: tuple  # product states p_t .. p_{t+H}
    score: float

    @property
    def ts_path(self) -> list:
        return [p[0] for p in self.states]

    @property
    def next_state(self):
        return self.states[1]


def find_conflicts(ctx: AgentContext, hp_paths: Mapping) -> ConflictSet:
    """Conflicts induced by the horizon paths (TS states, length H+1) of the
    higher-priority neighbors.

    For every hop ``h`` and neighbor ``j``: ``x^j_h`` may not be occupied, and
    the move ``x^j_h -> x^j_{h-1}`` (a swap with ``j``) may not be taken.  With
    no higher-priority neighbor and positive energy, hop-1 moves that fail to
    strictly decrease energy are forbidden as well.
    """
    H = ctx.horizon
    c = ConflictSet()
    for j, path in hp_paths.items():
        path = list(path)
        if len(path) != H + 1:
            raise ValueError(f"path of agent {j} has length {len(path)}, expected {H + 1}")
        for h in range(1, H + 1):
            c.forbid_state(h, path[h])
            c.forbid_move(h, path[h], path[h - 1])
    e_now = ctx.current_energy
    if not hp_paths and e_now > 0:
        x = ctx.position
        for _, y, e in ctx.successors(ctx.current):
            if e >= e_now:
                c.forbid_move(1, x, y)
    return c


def horizon_plan(ctx: AgentContext, conflicts: ConflictSet) -> HorizonPath:
    """Cheapest conflict-free H-hop path from the current product state.

    All H-hop paths are enumerated depth first; a path is discarded at the
    first hop that hits a forbidden state or move.  Cost is the sum of the
    energies of ``p_{t+1} .. p_{t+H}``; for a satisfied agent (all energies
    zero) it is the number of hops that leave the current cell.  Equal costs
    keep the lexicographically smallest state sequence.
    """
    H = ctx.horizon
    satisfied = ctx.satisfied
    forb_x = [conflicts.states.get(h, ()) for h in range(H + 1)]
    forb_m = [conflicts.moves.get(h, ()) for h in range(H + 1)]
    successors = ctx.successors
    path = [ctx.current]
    best_cost = None
    best_path = None

    def dfs(h, cost):
        nonlocal best_cost, best_path
        p = path[-1]
        x = p[0]
        fx = forb_x[h]
        fm = forb_m[h]
        last = h == H
        for q, y, e in successors(p):
            if y in fx or (x, y) in fm:
                continue
            c = cost + ((y != x) if satisfied else e)
            if last:
                if best_cost is None or c < best_cost:
                    best_cost = c
                    best_path = tuple(path) + (q,)
            else:
                path.append(q)
                dfs(h + 1, c)
                path.pop()

    dfs(1, 0)
    if best_path is None:
        raise NoSafePath(ctx.agent_id)
    return HorizonPath(best_path, float(best_cost))


@dataclass
class PlanResult:
    agent_id: int
    priority: PriorityOrder
    conflicts: ConflictSet
    path: HorizonPath

    @property
    def next_state(self):
        return self.path.next_state


def plan_step(ctx: AgentContext, neighbors: Iterable, paths: Mapping,
              tie_keys: Optional[Mapping] = None) -> PlanResult:
    """One planning iteration: prioritize, collect conflicts from the
    higher-priority neighbors' current horizon paths, search.

    ``neighbors`` are ``(id, energy, satisfied)`` triples including this agent;
    ``paths`` maps agent ids to their updated TS horizon paths and must cover
    every higher-priority neighbor.  The context is not modified; see
    :func:`commit`.
    """
    order = assign_priorities(ctx.agent_id, neighbors, tie_keys)
    missing = [j for j in order.higher if j not in paths]
    if missing:
        raise RuntimeError(f"agent {ctx.agent_id} planned before higher-priority {missing}")
    conflicts = find_conflicts(ctx, {j: paths[j] for j in sorted(order.higher)})
    path = horizon_plan(ctx, conflicts)
    return PlanResult(ctx.agent_id, order, conflicts, path)


def commit(ctx: AgentContext, next_state) -> None:
    """Append the first step of the chosen path and advance; acceptance latches."""
    if next_state not in ctx.product.succ.get(ctx.current, ()):
        raise ValueError(f"{next_state} is not a successor of {ctx.current}")
    ctx.committed.append(next_state)
    ctx.current = next_state
    if next_state in ctx.product.accepting:
        ctx.satisfied = True
