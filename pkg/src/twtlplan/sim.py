"""Synchronous round-based execution of the decentralized planner.

Each round: neighborhoods (2H hops) are taken from the current cells, every
agent ranks its neighborhood, and agents plan in an order where all
higher-priority neighbors have published their updated path first (the
update-flag wait).  Once everyone has planned, the first step of every path
is committed simultaneously.
"""

from __future__ import annotations

import logging
import math
import random
import time
from graphlib import TopologicalSorter
from typing import Optional, Sequence

from . import twtl
from .automaton import compile_relaxed_dfsa
from .environment import GridSpec, TransitionSystem, build_grid, hop_distances
from .errors import MissionInfeasible, NoSafePath, TimeoutNotSatisfied
from .planner import AgentContext, assign_priorities, commit, plan_step, priority_key
from .product import (INF, build_product, compute_energy, project_to_ts, prune_infinite,
                      shortest_accepting_path)
from .trace import AgentRecord, PathMessage, RoundRecord, Trace, as_state

log = logging.getLogger(__name__)

PROTOCOLS = ("schedule", "messages")


class Mission:
    """Owner of all agent contexts plus the shared environment."""

    def __init__(self, ts: TransitionSystem, contexts: list, formulas: dict, horizon: int,
                 tie_break: str = "deterministic", seed: Optional[int] = None,
                 protocol: str = "schedule"):
        if tie_break not in ("deterministic", "seeded"):
            raise ValueError(f"unknown tie-break mode {tie_break!r}")
        if tie_break == "seeded" and seed is None:
            raise ValueError("seeded tie-break needs a seed")
        if protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {protocol!r}")
        self.ts = ts
        self.contexts = contexts
        self.formulas = formulas
        self.horizon = horizon
        self.tie_break = tie_break
        self.seed = seed
        self.protocol = protocol
        self.rng = random.Random(seed)
        self.offline_time = 0.0
        self.nominal = {}
        self.trace = Trace(horizon, [{"id": c.agent_id, "start": c.committed[0][0],
                                      "formula": twtl.format_formula(formulas[c.agent_id])}
                                     for c in contexts],
                           tie_break=tie_break, seed=seed)
        self.trace.rounds.append(self._record(0, {}, {}, []))

    @property
    def by_id(self) -> dict:
        return {c.agent_id: c for c in self.contexts}

    def all_satisfied(self) -> bool:
        return all(c.satisfied for c in self.contexts)

    def _record(self, rnd, plans, ranks, schedule, messages=()):
        rows = []
        for c in self.contexts:
            res = plans.get(c.agent_id)
            rows.append(AgentRecord(
                c.agent_id, c.position, tuple(sorted(self.ts.labels[c.position])),
                c.current[1], c.current_energy, c.satisfied,
                ranks.get(c.agent_id) if res else None,
                sorted(res.priority.higher) if res else None,
                res.path.ts_path if res else None))
        return RoundRecord(rnd, rows, list(schedule), list(messages))


def _alphabet(ts, phi):
    return ts.alphabet() | {frozenset([l]) for l in twtl.labels(phi)}


def setup_mission(env, formulas: Sequence, horizon: int = 1, tie_break: str = "deterministic",
                  seed: Optional[int] = None, protocol: str = "schedule") -> Mission:
    """Offline part: per agent compile the relaxed automaton, build and prune
    the product, compute energies and a nominal (solo) plan.

    ``env`` is a :class:`GridSpec` (agents taken from it) or a pair
    ``(TransitionSystem, starts)``; ``formulas`` are ASTs or strings indexed by
    each agent's ``formula_index``.  Agent ids are ``1..n``.
    """
    t0 = time.perf_counter()
    formulas = [twtl.parse_formula(f) if isinstance(f, str) else f for f in formulas]
    if isinstance(env, GridSpec):
        ts = build_grid(env)
        assignments = [(a.start, a.formula_index) for a in env.agents]
    else:
        ts, starts = env
        assignments = [(as_state(s), i) for i, s in enumerate(starts)]
    if not assignments:
        raise ValueError("no agents")
    contexts = []
    per_agent = {}
    cache = {}
    for k, (start, fi) in enumerate(assignments):
        agent_id = k + 1
        if fi >= len(formulas):
            raise ValueError(f"agent {agent_id} refers to missing formula {fi}")
        phi = formulas[fi]
        per_agent[agent_id] = phi
        if fi not in cache:
            cache[fi] = compile_relaxed_dfsa(phi, _alphabet(ts, phi))
        prod = build_product(ts, cache[fi], as_state(start))
        energy = compute_energy(prod)
        if energy[prod.initial] == INF:
            raise MissionInfeasible(agent_id)
        prod = prune_infinite(prod, energy)
        energy = {p: energy[p] for p in prod.succ}
        contexts.append(AgentContext(agent_id, prod, energy, prod.initial, horizon,
                                     formula=phi))
    mission = Mission(ts, contexts, per_agent, horizon, tie_break, seed, protocol)
    for c in contexts:
        mission.nominal[c.agent_id] = project_to_ts(shortest_accepting_path(c.product, c.energy))
    mission.offline_time = mission.trace.offline_time = time.perf_counter() - t0
    return mission


def neighborhoods(mission: Mission) -> dict:
    """Agents within 2H hops of each agent (self included)."""
    reach = 2 * mission.horizon
    pos = {c.agent_id: c.position for c in mission.contexts}
    out = {}
    for i, x in pos.items():
        dist = hop_distances(mission.ts, x, cutoff=reach)
        out[i] = sorted(j for j, y in pos.items() if y in dist)
    return out


def run_round(mission: Mission, round_index: int) -> RoundRecord:
    ctxs = mission.by_id
    nbhd = neighborhoods(mission)
    info = {i: (i, c.current_energy, c.satisfied) for i, c in ctxs.items()}
    if mission.tie_break == "seeded":
        perm = list(ctxs)
        mission.rng.shuffle(perm)
        tie = {i: k for k, i in enumerate(perm)}
    else:
        tie = {i: i for i in ctxs}
    hp = {i: assign_priorities(i, [info[j] for j in nbhd[i]], tie).higher for i in ctxs}
    gkey = {i: priority_key(info[i][1], info[i][2], tie[i]) for i in ctxs}
    ranks = {i: k for k, i in enumerate(sorted(ctxs, key=gkey.get))}

    plans = {}
    schedule = []
    messages = []

    def run_agent(i, paths):
        neighbors = [info[j] for j in nbhd[i]]
        t0 = time.perf_counter()
        try:
            res = plan_step(ctxs[i], neighbors, paths, tie)
        except NoSafePath as exc:
            raise NoSafePath(exc.agent_id, round_index) from None
        mission.trace.timings[(round_index, i)] = time.perf_counter() - t0
        plans[i] = res
        schedule.append(i)
        msg = PathMessage(i, res.path.ts_path, ctxs[i].current_energy, ctxs[i].satisfied,
                          True, [j for j in nbhd[i] if j != i])
        messages.append(msg)
        return msg

    if mission.protocol == "schedule":
        published = {}
        sorter = TopologicalSorter({i: hp[i] for i in ctxs})
        sorter.prepare()
        while sorter.is_active():
            for i in sorted(sorter.get_ready(), key=gkey.get):
                published[i] = run_agent(i, published).path
                sorter.done(i)
    else:
        # explicit inboxes: an agent plans once every higher-priority neighbor's
        # latest message carries a raised update flag
        inbox = {i: {} for i in ctxs}
        pending = sorted(ctxs, key=gkey.get)
        while pending:
            ready = [i for i in pending
                     if all(j in inbox[i] and inbox[i][j].u_flag for j in hp[i])]
            if not ready:
                raise RuntimeError(f"update-flag deadlock among agents {pending}")
            for i in ready:
                msg = run_agent(i, {j: m.path for j, m in inbox[i].items()})
                for j in msg.recipients:
                    inbox[j][i] = msg
                pending.remove(i)

    # barrier: everyone has planned, move simultaneously
    for i, res in plans.items():
        commit(ctxs[i], res.next_state)
    return mission._record(round_index, plans, ranks, schedule, [m.to_dict() for m in messages])


def default_max_rounds(mission: Mission) -> int:
    total = sum(c.energy[c.committed[0]] for c in mission.contexts)
    return max(1, 10 * math.ceil(total))


def run_mission(mission: Mission, max_rounds: Optional[int] = None) -> Trace:
    """Run rounds until every agent is satisfied.

    Raises :class:`TimeoutNotSatisfied` or :class:`NoSafePath`; both carry the
    partial trace.
    """
    if max_rounds is None:
        max_rounds = default_max_rounds(mission)
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    trace = mission.trace
    rnd = len(trace.rounds) - 1
    while not mission.all_satisfied():
        if rnd >= max_rounds:
            trace.status = "timeout"
            _finish(mission)
            raise TimeoutNotSatisfied(rnd, [c.agent_id for c in mission.contexts
                                            if not c.satisfied], trace)
        rnd += 1
        try:
            trace.rounds.append(run_round(mission, rnd))
        except NoSafePath as exc:
            trace.status = "no_safe_path"
            _finish(mission)
            exc.trace = trace
            raise
    trace.status = "completed"
    _finish(mission)
    return trace


def _finish(mission):
    trace = mission.trace
    for c in mission.contexts:
        word = trace.word(c.agent_id)
        end = twtl.completion_tick(word, c.formula, "inf")
        trace.tau[c.agent_id] = (None if end is None
                                 else twtl.minimal_relaxation(word[:end + 1], c.formula))


def nominal_relaxations(mission: Mission) -> dict:
    """Relaxation achieved by each agent's solo shortest plan."""
    out = {}
    for c in mission.contexts:
        word = [mission.ts.labels[x] for x in mission.nominal[c.agent_id]]
        out[c.agent_id] = twtl.minimal_relaxation(word, c.formula)
    return out


def simulate(env, formulas, horizon=1, max_rounds=None, **kw) -> Trace:
    """setup + run in one call."""
    return run_mission(setup_mission(env, formulas, horizon, **kw), max_rounds)
