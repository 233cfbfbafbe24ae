"""Exception hierarchy shared across the package."""


class TwtlPlanError(Exception):
    """Base class for all package errors."""


class TwtlSyntaxError(TwtlPlanError):
    def __init__(self, message, position=None, line=None):
        self.position = position
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if position is not None:
            where.append(f"col {position}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class AlphabetError(TwtlPlanError):
    """A symbol or label is missing from an automaton alphabet."""


class EnvironmentSpecError(TwtlPlanError):
    """Invalid environment description; ``path`` names the offending field."""

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class MissionInfeasible(TwtlPlanError):
    def __init__(self, agent_id, reason="initial product state has infinite energy"):
        self.agent_id = agent_id
        super().__init__(f"agent {agent_id}: {reason}")


class NoSafePath(TwtlPlanError):
    def __init__(self, agent_id, round_index=None, trace=None):
        self.agent_id = agent_id
        self.round_index = round_index
        self.trace = trace
        super().__init__(f"agent {agent_id} has no conflict-free horizon path"
                         + (f" in round {round_index}" if round_index is not None else ""))


class TimeoutNotSatisfied(TwtlPlanError):
    def __init__(self, rounds, unsatisfied, trace=None):
        self.rounds = rounds
        self.unsatisfied = list(unsatisfied)
        self.trace = trace
        super().__init__(f"agents {self.unsatisfied} not satisfied after {rounds} rounds")


class InstanceTooLarge(TwtlPlanError):
    def __init__(self, estimate, limit):
        self.estimate = estimate
        self.limit = limit
        super().__init__(f"joint search estimate {estimate:.3g} exceeds limit {limit:.3g}")


class MalformedTrace(TwtlPlanError):
    pass
