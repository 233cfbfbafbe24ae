"""Deterministic automata accepting every finite temporal relaxation of a formula.

Each formula node is turned into a small deterministic machine over hashable
states.  Window nodes drop their upper bound and launch a fresh copy of their
sub-machine on every tick at or after the lower bound; the set of live copies
is tracked explicitly (subset construction), which is the only source of
nondeterminism since concatenation hands over at the left operand's first
completion.  Acceptance is absorbing.  The composite machine is then explored
from its initial state over the alphabet, states that cannot reach acceptance
are pruned, and the survivors are renumbered ``0..n-1`` in breadth-first
order.

Window upper bounds never enter the construction, so the automaton size does
not depend on deadlines.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import twtl
from .errors import AlphabetError
from .twtl import And, Concat, Formula, Hold, Or, Within

ACC = "acc"


def symbol_key(symbol):
    return tuple(sorted(symbol))


class _HoldM:
    def __init__(self, node: Hold):
        self.d = node.duration
        self.label = node.label
        self.negated = node.negated
        self.init = 0

    def step(self, q, sym):
        if q == ACC:
            return ACC
        if (self.label in sym) == self.negated:
            return None
        return ACC if q == self.d else q + 1


class _WithinM:
    def __init__(self, node: Within, sub):
        self.sub = sub
        self.lo = node.lo
        self.armed = ("run", frozenset([sub.init]))
        self.init = ("wait", 0) if self.lo > 0 else self.armed

    def step(self, q, sym):
        if q == ACC:
            return ACC
        kind, data = q
        if kind == "wait":
            return ("wait", data + 1) if data + 1 < self.lo else self.armed
        live = set()
        for s in data:
            nxt = self.sub.step(s, sym)
            if nxt == ACC:
                return ACC
            if nxt is not None:
                live.add(nxt)
        live.add(self.sub.init)
        return ("run", frozenset(live))


class _ConcatM:
    def __init__(self, left, right):
        self.left = left
        self.right = right
        self.init = ("L", left.init)

    def step(self, q, sym):
        if q == ACC:
            return ACC
        side, s = q
        if side == "L":
            nxt = self.left.step(s, sym)
            if nxt is None:
                return None
            return ("R", self.right.init) if nxt == ACC else ("L", nxt)
        nxt = self.right.step(s, sym)
        if nxt is None or nxt == ACC:
            return nxt
        return ("R", nxt)


class _AndM:
    def __init__(self, left, right):
        self.left = left
        self.right = right
        self.init = (left.init, right.init)

    def step(self, q, sym):
        if q == ACC:
            return ACC
        a = self.left.step(q[0], sym)
        b = self.right.step(q[1], sym)
        if a is None or b is None:
            return None
        if a == ACC and b == ACC:
            return ACC
        return (a, b)


class _OrM:
    # a dead side is kept as None inside the pair
    def __init__(self, left, right):
        self.left = left
        self.right = right
        self.init = (left.init, right.init)

    def step(self, q, sym):
        if q == ACC:
            return ACC
        a = None if q[0] is None else self.left.step(q[0], sym)
        b = None if q[1] is None else self.right.step(q[1], sym)
        if a == ACC or b == ACC:
            return ACC
        if a is None and b is None:
            return None
        return (a, b)


def _machine(phi: Formula):
    if isinstance(phi, Hold):
        return _HoldM(phi)
    if isinstance(phi, Within):
        return _WithinM(phi, _machine(phi.sub))
    if isinstance(phi, Concat):
        return _ConcatM(_machine(phi.left), _machine(phi.right))
    if isinstance(phi, And):
        return _AndM(_machine(phi.left), _machine(phi.right))
    if isinstance(phi, Or):
        return _OrM(_machine(phi.left), _machine(phi.right))
    raise TypeError(f"not a formula node: {phi!r}")


@dataclass(frozen=True)
class Dfsa:
    """Partial deterministic automaton; a missing transition rejects."""

    n_states: int
    initial: int
    alphabet: frozenset
    transitions: dict = field(repr=False)  # (state, symbol) -> state
    accepting: frozenset
    formula: Optional[Formula] = field(default=None, compare=False, repr=False)

    @property
    def states(self) -> range:
        return range(self.n_states)

    @property
    def n_transitions(self) -> int:
        return len(self.transitions)

    def step(self, state: int, symbol) -> Optional[int]:
        return dfsa_step(self, state, symbol)

    def accepts(self, word: Iterable) -> bool:
        q = self.initial
        for sym in twtl.as_word(word):
            q = self.step(q, sym)
            if q is None:
                return False
        return q in self.accepting

    def to_text(self) -> str:
        """Edge-list export: header lines then ``src<TAB>symbol<TAB>dst``."""
        lines = [f"# states {self.n_states}", f"# initial {self.initial}",
                 f"# accepting {' '.join(map(str, sorted(self.accepting)))}"]
        if self.formula is not None:
            lines.insert(0, f"# formula {twtl.format_formula(self.formula)}")
        for (src, sym), dst in sorted(self.transitions.items(),
                                      key=lambda kv: (kv[0][0], symbol_key(kv[0][1]))):
            lines.append(f"{src}\t{','.join(symbol_key(sym)) or '-'}\t{dst}")
        return "\n".join(lines) + "\n"


def compile_relaxed_dfsa(phi: Formula, alphabet: Iterable) -> Dfsa:
    """Compile ``phi`` into a :class:`Dfsa` accepting exactly the words that
    satisfy some finite relaxation of ``phi``.

    ``alphabet`` is a collection of label-sets (each symbol is the label set of
    one transition-system state); every label mentioned by ``phi`` must occur
    in at least one symbol.
    """
    alphabet = frozenset(twtl.as_symbol(s) for s in alphabet)
    known = set().union(*alphabet) if alphabet else set()
    missing = twtl.labels(phi) - known
    if missing:
        raise AlphabetError(f"alphabet lacks labels {sorted(missing)}")
    symbols = sorted(alphabet, key=symbol_key)
    machine = _machine(phi)

    ids = {machine.init: 0}
    order = [machine.init]
    raw = {}
    queue = deque([machine.init])
    while queue:
        q = queue.popleft()
        for sym in symbols:
            nxt = machine.step(q, sym)
            if nxt is None:
                continue
            if nxt not in ids:
                ids[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            raw[(ids[q], sym)] = ids[nxt]

    # prune states that cannot reach acceptance
    preds = {i: set() for i in range(len(order))}
    for (src, _), dst in raw.items():
        preds[dst].add(src)
    live = set()
    if ACC in ids:
        stack = [ids[ACC]]
        live.add(ids[ACC])
        while stack:
            v = stack.pop()
            for u in preds[v]:
                if u not in live:
                    live.add(u)
                    stack.append(u)
    if 0 not in live:
        # empty language: keep a lone non-accepting initial state
        return Dfsa(1, 0, alphabet, {}, frozenset(), phi)

    # renumber survivors breadth-first from the initial state
    renum = {0: 0}
    queue = deque([0])
    succ = {}
    for (src, sym), dst in raw.items():
        if src in live and dst in live:
            succ.setdefault(src, []).append((sym, dst))
    while queue:
        v = queue.popleft()
        for sym, dst in sorted(succ.get(v, []), key=lambda e: symbol_key(e[0])):
            if dst not in renum:
                renum[dst] = len(renum)
                queue.append(dst)
    transitions = {(renum[src], sym): renum[dst]
                   for (src, sym), dst in raw.items()
                   if src in renum and dst in renum}
    accepting = frozenset([renum[ids[ACC]]])
    return Dfsa(len(renum), 0, alphabet, transitions, accepting, phi)


def dfsa_step(aut: Dfsa, state: int, symbol) -> Optional[int]:
    """Successor of ``state`` on ``symbol``; None when the word can no longer be
    accepted.  Raises :class:`AlphabetError` for symbols outside the alphabet."""
    symbol = twtl.as_symbol(symbol)
    if symbol not in aut.alphabet:
        raise AlphabetError(f"symbol {sorted(symbol)} not in alphabet")
    if not 0 <= state < aut.n_states:
        raise ValueError(f"unknown automaton state {state}")
    return aut.transitions.get((state, symbol))


def alphabet_for(labels: Iterable[str], include_empty: bool = True) -> frozenset:
    """Singleton-label alphabet (plus the empty label-set)."""
    syms = {frozenset([l]) for l in labels}
    if include_empty:
        syms.add(frozenset())
    return frozenset(syms)
