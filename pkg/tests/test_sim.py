import csv
import random

import pytest

from scenario_gen import random_scenario
from twtlplan import scenario_paths, twtl
from twtlplan.environment import AgentSpec, GridSpec, TransitionSystem, load_environment
from twtlplan.errors import MalformedTrace, MissionInfeasible, TimeoutNotSatisfied
from twtlplan.sim import (default_max_rounds, neighborhoods, nominal_relaxations,
                          run_mission, setup_mission, simulate)
from twtlplan.trace import Trace
from twtlplan.verify import check_safety, schedule_violations


def survey():
    env, formulas = scenario_paths("grid6x6x3")
    return load_environment(env), twtl.parse_formula_file(formulas)


def test_rounds_and_header():
    spec, formulas = survey()
    trace = simulate(spec, formulas, horizon=2)
    assert trace.status == "completed"
    assert [r.round for r in trace.rounds] == list(range(trace.n_rounds + 1))
    assert [a["start"] for a in trace.agents] == [a.start for a in spec.agents]
    assert all(r.by_agent()[a].satisfied for r in trace.rounds[-1:] for a in trace.agent_ids)
    # planning metadata is present from round 1 on
    assert all(a.path is not None and len(a.path) == 3 for r in trace.rounds[1:] for a in r.agents)
    assert trace.offline_time > 0
    assert len(trace.timings) == 5 * trace.n_rounds


def test_deterministic_runs_are_byte_identical():
    spec, formulas = survey()
    a = simulate(spec, formulas, horizon=2).to_jsonl()
    b = simulate(spec, formulas, horizon=2).to_jsonl()
    assert a == b


def test_seeded_runs_reproduce():
    spec, formulas = survey()
    a = simulate(spec, formulas, 2, tie_break="seeded", seed=7).to_jsonl()
    b = simulate(spec, formulas, 2, tie_break="seeded", seed=7).to_jsonl()
    assert a == b
    with pytest.raises(ValueError):
        setup_mission(spec, formulas, 2, tie_break="seeded")


@pytest.mark.parametrize("seed", range(12))
def test_message_protocol_matches_schedule(seed):
    spec, formulas, h = random_scenario(random.Random(seed))
    a = simulate(spec, formulas, h).to_jsonl()
    b = simulate(spec, formulas, h, protocol="messages").to_jsonl()
    assert a == b


@pytest.mark.parametrize("seed", range(12))
def test_higher_priority_neighbours_plan_first(seed):
    spec, formulas, h = random_scenario(random.Random(seed))
    for protocol in ("schedule", "messages"):
        trace = simulate(spec, formulas, h, protocol=protocol)
        assert schedule_violations(trace) == []
        for r in trace.rounds[1:]:
            # each plan's hp set contains only neighbours ranked above it
            rank = {a.agent: a.rank for a in r.agents}
            for a in r.agents:
                assert all(rank[j] < rank[a.agent] for j in a.hp)


def test_messages_carry_raised_update_flags_to_neighbours():
    spec, formulas = survey()
    trace = simulate(spec, formulas, 2, protocol="messages")
    for r in trace.rounds[1:]:
        assert [m["sender"] for m in r.messages] == r.schedule
        assert all(m["u_flag"] for m in r.messages)


def test_neighborhoods_use_twice_the_horizon():
    ts = TransitionSystem.from_edges([(k, k + 1) for k in range(8)], labels={8: "A"})
    mission = setup_mission((ts, [0, 3, 5]), ["[H^0 A]^[0,20]"] * 3, horizon=1)
    assert neighborhoods(mission) == {1: [1], 2: [2, 3], 3: [2, 3]}


def test_timeout_carries_partial_trace():
    spec, formulas = survey()
    mission = setup_mission(spec, formulas, 1)
    with pytest.raises(TimeoutNotSatisfied) as info:
        run_mission(mission, max_rounds=3)
    assert info.value.trace.n_rounds == 3
    assert info.value.trace.status == "timeout"
    assert set(info.value.unsatisfied) == {1, 2, 3, 4, 5}


def test_infeasible_agent_is_reported():
    ts = TransitionSystem.from_edges([(0, 1)], labels={0: "B"})
    with pytest.raises(MissionInfeasible) as info:
        setup_mission((ts, [0, 1]), ["[H^0 B]^[0,3]", "[H^0 A]^[0,3]"])
    assert info.value.agent_id == 2


def test_default_round_budget():
    spec, formulas = survey()
    mission = setup_mission(spec, formulas, 1)
    assert default_max_rounds(mission) == 10 * (10 + 8 + 8 + 8 + 11)


def test_nominal_relaxations_of_survey():
    spec, formulas = survey()
    nominal = nominal_relaxations(setup_mission(spec, formulas, 1))
    assert nominal == {1: (-1, -1), 2: (-1, -1), 3: (-1, 0), 4: (-1, 0), 5: (-1, -1)}


def test_trace_roundtrip_and_csv(tmp_path):
    spec, formulas = survey()
    trace = simulate(spec, formulas, 2)
    path = tmp_path / "trace.jsonl"
    trace.write(path)
    again = Trace.read(path)
    assert again.to_jsonl() == trace.to_jsonl()
    assert again.tau == trace.tau
    trace.write_energy_csv(tmp_path / "e.csv")
    rows = list(csv.DictReader(open(tmp_path / "e.csv")))
    assert len(rows) == 5 * (trace.n_rounds + 1)
    first = [r for r in rows if r["round"] == "0"]
    assert float(first[0]["collective"]) == sum(float(r["energy"]) for r in first) == 45
    trace.write_timing_csv(tmp_path / "t.csv")
    assert len(open(tmp_path / "t.csv").read().splitlines()) == 1 + 5 * trace.n_rounds


def test_malformed_traces_are_rejected():
    spec, formulas = survey()
    text = simulate(spec, formulas, 1).to_jsonl()
    lines = text.splitlines()
    with pytest.raises(MalformedTrace):
        Trace.from_jsonl("\n".join(lines[1:]))  # no header
    with pytest.raises(MalformedTrace):
        Trace.from_jsonl("\n".join(lines[:2] + lines[3:]))  # missing round 1
    with pytest.raises(MalformedTrace):
        Trace.from_jsonl(text + "{not json\n")


def test_grid_spec_agents_map_to_formulas_by_index():
    spec = GridSpec((3, 1, 1), [], {"A": [(2, 0, 0)], "B": [(0, 0, 0)]},
                    [AgentSpec((0, 0, 0), 1), AgentSpec((2, 0, 0), 1)], "face6")
    mission = setup_mission(spec, ["[H^0 A]^[0,3]", "[H^0 B]^[0,3]"])
    assert [c.current_energy for c in mission.contexts] == [0, 2]
