"""Trace records and their JSON-lines / CSV serialization.

A trace file holds one JSON object per line:

* ``{"type": "header", "horizon", "tie_break", "seed", "agents": [{"id", "start", "formula"}]}``
* one ``{"type": "round", "round", "schedule", "agents": [...], "messages": [...]}``
  per round; round 0 holds the start configuration, round ``t >= 1`` the
  configuration after the ``t``-th commit together with the planning data
  (``rank``, ``hp``, ``path``) that produced it
* ``{"type": "footer", "status", "rounds", "tau": {id: [...] | null}}``

Wall-clock timings are kept out of the trace file so that deterministic runs
produce identical files; they go to the timing CSV instead.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

from .errors import MalformedTrace


def as_state(value):
    """JSON turns cell tuples into lists; turn them back (scalars pass through)."""
    return tuple(value) if isinstance(value, list) else value


def json_state(x):
    return list(x) if isinstance(x, tuple) else x


@dataclass
class AgentRecord:
    agent: int
    state: tuple
    label: tuple
    dfa_state: Optional[int]
    energy: float
    satisfied: bool
    rank: Optional[int] = None
    hp: Optional[list] = None
    path: Optional[list] = None

    def to_dict(self):
        d = {"id": self.agent, "state": json_state(self.state), "label": list(self.label),
             "dfa_state": self.dfa_state, "energy": self.energy, "satisfied": self.satisfied}
        if self.path is not None:
            d.update(rank=self.rank, hp=list(self.hp), path=[json_state(x) for x in self.path])
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            path = d.get("path")
            return cls(int(d["id"]), as_state(d["state"]), tuple(d.get("label", ())),
                       d.get("dfa_state"), float(d["energy"]), bool(d["satisfied"]),
                       d.get("rank"), d.get("hp"),
                       None if path is None else [as_state(x) for x in path])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedTrace(f"bad agent record {d!r}: {exc}") from None


@dataclass
class PathMessage:
    sender: int
    path: list
    energy: float
    satisfied: bool
    u_flag: bool
    recipients: list = field(default_factory=list)

    def to_dict(self):
        return {"sender": self.sender, "recipients": list(self.recipients),
                "path": [json_state(x) for x in self.path], "energy": self.energy,
                "satisfied": self.satisfied, "u_flag": self.u_flag}


@dataclass
class RoundRecord:
    round: int
    agents: list
    schedule: list = field(default_factory=list)
    messages: list = field(default_factory=list)

    def by_agent(self) -> dict:
        return {a.agent: a for a in self.agents}

    def to_dict(self):
        return {"type": "round", "round": self.round, "schedule": list(self.schedule),
                "agents": [a.to_dict() for a in self.agents],
                "messages": [m if isinstance(m, dict) else m.to_dict() for m in self.messages]}


@dataclass
class Trace:
    horizon: int
    agents: list  # [{"id", "start", "formula"}]
    rounds: list = field(default_factory=list)
    tie_break: str = "deterministic"
    seed: Optional[int] = None
    status: str = "running"
    tau: dict = field(default_factory=dict)
    # not serialized: {(round, agent): seconds}
    timings: dict = field(default_factory=dict, repr=False)
    offline_time: float = 0.0

    @property
    def agent_ids(self) -> list:
        return [a["id"] for a in self.agents]

    @property
    def n_rounds(self) -> int:
        return max(len(self.rounds) - 1, 0)

    def states(self, agent) -> list:
        return [r.by_agent()[agent].state for r in self.rounds]

    def word(self, agent) -> list:
        return [frozenset(r.by_agent()[agent].label) for r in self.rounds]

    def energies(self, agent) -> list:
        return [r.by_agent()[agent].energy for r in self.rounds]

    # ---------------------------------------------------------------- output

    def to_jsonl(self) -> str:
        lines = [json.dumps({"type": "header", "horizon": self.horizon,
                             "tie_break": self.tie_break, "seed": self.seed,
                             "agents": self.agents})]
        lines += [json.dumps(r.to_dict()) for r in self.rounds]
        lines.append(json.dumps({"type": "footer", "status": self.status,
                                 "rounds": self.n_rounds,
                                 "tau": {str(k): (None if v is None else list(v))
                                         for k, v in sorted(self.tau.items())}}))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        header = None
        rounds = []
        footer = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedTrace(f"line {lineno}: {exc}") from None
            kind = rec.get("type")
            if kind == "header":
                header = rec
            elif kind == "round":
                rounds.append(RoundRecord(int(rec["round"]),
                                          [AgentRecord.from_dict(a) for a in rec["agents"]],
                                          rec.get("schedule", []), rec.get("messages", [])))
            elif kind == "footer":
                footer = rec
            else:
                raise MalformedTrace(f"line {lineno}: unknown record type {kind!r}")
        if header is None:
            raise MalformedTrace("missing header record")
        agents = [dict(a, start=as_state(a["start"])) for a in header["agents"]]
        tr = cls(header["horizon"], agents, rounds, header.get("tie_break", "deterministic"),
                 header.get("seed"), footer.get("status", "unknown"),
                 {int(k): (None if v is None else tuple(v))
                  for k, v in footer.get("tau", {}).items()})
        tr.validate()
        return tr

    @classmethod
    def read(cls, path) -> "Trace":
        with open(path, encoding="utf-8") as fh:
            return cls.from_jsonl(fh.read())

    def validate(self) -> None:
        ids = set(self.agent_ids)
        for i, r in enumerate(self.rounds):
            if r.round != i:
                raise MalformedTrace(f"round {r.round} found at position {i}")
            got = [a.agent for a in r.agents]
            if set(got) != ids or len(got) != len(ids):
                raise MalformedTrace(f"round {i}: agents {got}, expected {sorted(ids)}")
        if self.rounds:
            for a in self.agents:
                if self.rounds[0].by_agent()[a["id"]].state != a["start"]:
                    raise MalformedTrace(f"agent {a['id']} does not start at {a['start']}")

    def write_energy_csv(self, path) -> None:
        """``round, agent, energy, collective`` (collective = sum over agents)."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["round", "agent", "energy", "collective"])
            for r in self.rounds:
                total = sum(a.energy for a in r.agents)
                for a in r.agents:
                    w.writerow([r.round, a.agent, f"{a.energy:g}", f"{total:g}"])

    def write_timing_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["round", "agent", "iteration_time_s"])
            for (rnd, agent), sec in sorted(self.timings.items()):
                w.writerow([rnd, agent, f"{sec:.6f}"])

    def iteration_times(self) -> list:
        return [v for _, v in sorted(self.timings.items())]
