"""Independent checks on traces plus brute-force oracles for tiny instances.

Nothing here trusts the planner's bookkeeping: safety is re-derived from the
recorded cells, satisfaction from the recorded labels through the recursive
semantics, energies by fixpoint iteration, and the joint optimum by
exhaustive search.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

from . import twtl
from .automaton import compile_relaxed_dfsa
from .environment import TransitionSystem
from .errors import InstanceTooLarge, MalformedTrace
from .product import INF, ProductAutomaton, build_product, compute_energy
from .trace import Trace, json_state, as_state

EXIT_OK, EXIT_VIOLATION, EXIT_UNSATISFIED = 0, 1, 2


@dataclass(frozen=True)
class Violation:
    round: int
    kind: str  # "same-state" | "swap"
    agents: tuple
    states: tuple


@dataclass
class SafetyReport:
    violations: list = field(default_factory=list)

    @property
    def safe(self) -> bool:
        return not self.violations

    def to_dict(self):
        return {"safe": self.safe,
                "violations": [{"round": v.round, "kind": v.kind, "agents": list(v.agents),
                                "states": [json_state(s) for s in v.states]} for v in self.violations]}


def check_safety(trace: Trace, ts: Optional[TransitionSystem] = None) -> SafetyReport:
    """Pairwise occupancy and swap checks at every round.  When ``ts`` is given,
    consecutive cells are also checked to be moves of ``ts``."""
    if not isinstance(trace, Trace):
        raise MalformedTrace("expected a Trace")
    trace.validate()
    ids = trace.agent_ids
    report = SafetyReport()
    prev = None
    for r in trace.rounds:
        cur = {a.agent: as_state(a.state) for a in r.agents}
        if ts is not None:
            for i, x in cur.items():
                if x not in ts.succ:
                    raise MalformedTrace(f"round {r.round}: agent {i} at unknown state {x}")
                if prev is not None and x not in ts.succ[prev[i]]:
                    raise MalformedTrace(f"round {r.round}: agent {i} jumps {prev[i]} -> {x}")
        for i, j in itertools.combinations(ids, 2):
            if cur[i] == cur[j]:
                report.violations.append(Violation(r.round, "same-state", (i, j), (cur[i],)))
            if prev is not None and (prev[i], cur[i]) == (cur[j], prev[j]) and prev[i] != cur[i]:
                report.violations.append(
                    Violation(r.round, "swap", (i, j), (prev[i], cur[i])))
        prev = cur
    return report


@dataclass
class AgentSatisfaction:
    agent: int
    satisfied: bool
    tau: Optional[tuple]
    tr: Optional[int]
    round: Optional[int]


@dataclass
class SatisfactionReport:
    agents: dict = field(default_factory=dict)

    @property
    def all_satisfied(self) -> bool:
        return all(a.satisfied for a in self.agents.values())

    @property
    def total_tr(self) -> Optional[int]:
        if not self.all_satisfied:
            return None
        return sum(a.tr for a in self.agents.values())

    def to_dict(self):
        return {"all_satisfied": self.all_satisfied, "total_tr": self.total_tr,
                "agents": [{"agent": a.agent, "satisfied": a.satisfied,
                            "tau": None if a.tau is None else list(a.tau), "tr": a.tr,
                            "round": a.round} for a in self.agents.values()]}


def _tr(tau):
    return twtl.tr_norm(tau) if tau else 0


def satisfaction_of_word(word, phi) -> tuple:
    """``(round, tau)`` of the first prefix of ``word`` completing some
    relaxation of ``phi``; ``(None, None)`` if none does."""
    end = twtl.completion_tick(word, phi, "inf")
    if end is None:
        return None, None
    return end, twtl.minimal_relaxation(word[:end + 1], phi)


def check_satisfaction(trace: Trace, formulas=None) -> SatisfactionReport:
    """Per agent: labels visited from round 0 up to the first round at which
    the word completes the formula, and the minimal relaxation of that word.

    ``formulas`` maps agent id to formula (AST or text); defaults to the
    formulas recorded in the trace header.
    """
    if formulas is None:
        formulas = {a["id"]: a["formula"] for a in trace.agents}
    elif not isinstance(formulas, Mapping):
        formulas = dict(zip(trace.agent_ids, formulas))
    report = SatisfactionReport()
    for i in trace.agent_ids:
        phi = formulas[i]
        if isinstance(phi, str):
            phi = twtl.parse_formula(phi)
        rnd, tau = satisfaction_of_word(trace.word(i), phi)
        report.agents[i] = AgentSatisfaction(i, rnd is not None, tau,
                                             None if rnd is None else _tr(tau), rnd)
    return report


def schedule_violations(trace: Trace) -> list:
    """Rounds where an agent planned before one of its higher-priority
    neighbors (update-flag contract)."""
    bad = []
    for r in trace.rounds[1:]:
        pos = {a: k for k, a in enumerate(r.schedule)}
        for a in r.agents:
            for j in a.hp or ():
                if pos.get(j, math.inf) > pos.get(a.agent, -1):
                    bad.append((r.round, a.agent, j))
    return bad


def exit_code(safety: SafetyReport, sat: SatisfactionReport) -> int:
    if not safety.safe:
        return EXIT_VIOLATION
    if not sat.all_satisfied:
        return EXIT_UNSATISFIED
    return EXIT_OK


# --------------------------------------------------------------------------
# oracles

def energy_oracle(prod: ProductAutomaton) -> dict:
    """Distance to acceptance by Bellman-Ford style relaxation to a fixpoint."""
    dist = {p: (0.0 if p in prod.accepting else INF) for p in prod.succ}
    for _ in range(len(dist) + 1):
        changed = False
        for p, nbrs in prod.succ.items():
            if p in prod.accepting:
                continue
            best = dist[p]
            for q, w in nbrs.items():
                if dist[q] + w < best:
                    best = dist[q] + w
            if best < dist[p]:
                dist[p] = best
                changed = True
        if not changed:
            break
    return dist


@dataclass
class JointOptimum:
    total: Optional[int]  # min sum of |tau|_TR, None when infeasible within bound
    taus: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)
    explored: int = 0

    @property
    def feasible(self) -> bool:
        return self.total is not None


def brute_force_joint_optimum(ts: TransitionSystem, formulas, starts, bound: int,
                              limit: float = 2e7) -> JointOptimum:
    """Exhaustive search over safe synchronous joint paths of at most ``bound``
    steps minimizing the summed relaxation norm.

    Each agent's relaxation is measured when its word first completes the
    formula; the joint path ends once all agents have.  Branches are cut when
    some agent's remaining energy exceeds the remaining steps.  Raises
    :class:`InstanceTooLarge` when the unpruned joint path count would exceed
    ``limit``.
    """
    formulas = [twtl.parse_formula(f) if isinstance(f, str) else f for f in formulas]
    starts = [as_state(s) for s in starts]
    n = len(starts)
    if len(formulas) != n:
        raise ValueError("one formula per start required")
    deg = max(len(v) for v in ts.succ.values())
    estimate = float(deg) ** (n * bound)
    if estimate > limit:
        raise InstanceTooLarge(estimate, limit)

    auts, energies, states0 = [], [], []
    for phi, x0 in zip(formulas, starts):
        aut = compile_relaxed_dfsa(phi, ts.alphabet() | {frozenset([l]) for l in twtl.labels(phi)})
        prod = build_product(ts, aut, x0)
        auts.append(aut)
        energies.append(compute_energy(prod))
        states0.append(prod.initial[1])
    result = JointOptimum(None)
    if len(set(starts)) < n or any(s is None for s in states0):
        return result
    max_w = max(w for _, _, w in ts.edges())

    def lower_steps(i, x, s):
        e = energies[i].get((x, s), INF)
        return math.ceil(e / max_w - 1e-9) if e < INF else INF

    words = [[ts.labels[x]] for x in starts]
    paths = [[x] for x in starts]
    taus = [None] * n
    for i in range(n):
        if states0[i] in auts[i].accepting:
            taus[i] = twtl.minimal_relaxation(words[i], formulas[i])
    best = {"total": None}

    def total_of(ts_):
        return sum(_tr(t) for t in ts_)

    def search(t, pos, dfa):
        result.explored += 1
        if all(x is not None for x in taus):
            tot = total_of(taus)
            if best["total"] is None or tot < best["total"]:
                best["total"] = tot
                result.total = tot
                result.taus = {i + 1: taus[i] for i in range(n)}
                result.paths = {i + 1: list(paths[i]) for i in range(n)}
            return
        if t >= bound:
            return
        for i in range(n):
            if taus[i] is None and t + lower_steps(i, pos[i], dfa[i]) > bound:
                return
        options = []
        for i in range(n):
            opts = []
            for y in sorted(ts.succ[pos[i]]):
                s = auts[i].transitions.get((dfa[i], ts.labels[y]))
                if s is None:
                    continue
                opts.append((y, s))
            options.append(opts)
        for combo in itertools.product(*options):
            nxt = [c[0] for c in combo]
            if len(set(nxt)) < n:
                continue
            if any(nxt[i] == pos[j] and nxt[j] == pos[i]
                   for i, j in itertools.combinations(range(n), 2)):
                continue
            saved = list(taus)
            for i in range(n):
                words[i].append(ts.labels[nxt[i]])
                paths[i].append(nxt[i])
                if taus[i] is None and combo[i][1] in auts[i].accepting:
                    taus[i] = twtl.minimal_relaxation(words[i], formulas[i])
            search(t + 1, nxt, [c[1] for c in combo])
            for i in range(n):
                words[i].pop()
                paths[i].pop()
            taus[:] = saved

    search(0, starts, states0)
    return result
