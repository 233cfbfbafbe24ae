"""Decentralized receding-horizon planning for agents with time-window
temporal logic tasks on a shared grid."""

from importlib import resources

from .automaton import Dfsa, compile_relaxed_dfsa
from .environment import GridSpec, TransitionSystem, build_grid, load_environment
from .errors import (MissionInfeasible, NoSafePath, TimeoutNotSatisfied, TwtlPlanError,
                     TwtlSyntaxError)
from .sim import run_mission, setup_mission, simulate
from .trace import Trace
from .twtl import minimal_relaxation, parse_formula, parse_formula_file, satisfies, tr_norm
from .verify import check_safety, check_satisfaction

__version__ = "0.1.0"

SCENARIOS = ("grid6x6x3", "corridor")


def scenario_paths(name: str):
    """``(environment json, formula file)`` of a bundled scenario."""
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; bundled: {', '.join(SCENARIOS)}")
    base = resources.files(__name__) / "scenarios"
    return base / f"{name}.json", base / f"{name}_formulas.txt"
