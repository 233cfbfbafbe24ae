"""TWTL formulas: AST, concrete syntax, finite-word semantics and temporal relaxation.

Concrete grammar (loosest binding first)::

    phi    := and ('|' and)*
    and    := concat ('&' concat)*
    concat := atom ('.' atom)*
    atom   := 'H^' INT ['!'] LABEL
            | '[' phi ']^[' INT ',' INT ']'
            | '(' phi ')'
            | ['!'] LABEL                  # sugar for H^0

Semantics are evaluated through the *earliest completion tick* of a formula
started at tick ``t``: a hold ``H^d s`` completes at ``t + d``; a window
``[phi]^[a, b]`` completes at the earliest completion of ``phi`` started at any
tick ``>= t + a``, provided it is ``<= t + b``; a concatenation runs its right
operand from the tick after the left operand's earliest completion;
conjunction completes when both sides have, disjunction when either has.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from .errors import TwtlSyntaxError

Symbol = frozenset
Word = Sequence[frozenset]


@dataclass(frozen=True)
class Hold:
    duration: int
    label: str
    negated: bool = False

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("hold duration must be non-negative")
        if not self.label:
            raise ValueError("empty site label")


@dataclass(frozen=True)
class Within:
    sub: "Formula"
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo < 0 or self.hi < 0:
            raise ValueError("window bounds must be non-negative")
        if self.lo > self.hi:
            raise ValueError(f"empty window [{self.lo},{self.hi}]")


@dataclass(frozen=True)
class Concat:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


Formula = Union[Hold, Within, Concat, And, Or]


# --------------------------------------------------------------------------
# structure helpers

def windows(phi: Formula) -> list[Within]:
    """Within nodes in relaxation-index order (a window is numbered after
    everything nested inside it, i.e. by the position of its bounds in the
    concrete syntax)."""
    out: list[Within] = []

    def walk(node):
        if isinstance(node, Within):
            walk(node.sub)
            out.append(node)
        elif isinstance(node, (Concat, And, Or)):
            walk(node.left)
            walk(node.right)

    walk(phi)
    return out


def labels(phi: Formula) -> set[str]:
    if isinstance(phi, Hold):
        return {phi.label}
    if isinstance(phi, Within):
        return labels(phi.sub)
    return labels(phi.left) | labels(phi.right)


def with_upper_bounds(phi: Formula, his: Sequence[int]) -> Formula:
    """Copy of ``phi`` whose window upper bounds are replaced, in index order."""
    his = list(his)
    if len(his) != len(windows(phi)):
        raise ValueError("one upper bound per window required")
    it = iter(his)

    def rebuild(node):
        if isinstance(node, Hold):
            return node
        if isinstance(node, Within):
            sub = rebuild(node.sub)
            return Within(sub, node.lo, next(it))
        return type(node)(rebuild(node.left), rebuild(node.right))

    return rebuild(phi)


# --------------------------------------------------------------------------
# parsing / printing

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<hold>H\^)
  | (?P<winclose>\]\s*\^\s*\[)
  | (?P<int>\d+)
  | (?P<label>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[\[\](),.&|!])
""", re.VERBOSE)


def _tokenize(text):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise TwtlSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            value = m.group(kind)
            tokens.append((kind if kind != "op" else value, value, pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def take(self, kind):
        tok = self.tok
        if tok[0] != kind:
            found = tok[1] or "end of input"
            raise TwtlSyntaxError(f"expected {kind!r}, found {found!r}", tok[2])
        self.i += 1
        return tok

    def parse(self):
        node = self.or_expr()
        if self.tok[0] != "eof":
            raise TwtlSyntaxError(f"unexpected {self.tok[1]!r}", self.tok[2])
        return node

    def or_expr(self):
        node = self.and_expr()
        while self.tok[0] == "|":
            self.i += 1
            node = Or(node, self.and_expr())
        return node

    def and_expr(self):
        node = self.concat_expr()
        while self.tok[0] == "&":
            self.i += 1
            node = And(node, self.concat_expr())
        return node

    def concat_expr(self):
        node = self.atom()
        while self.tok[0] == ".":
            self.i += 1
            node = Concat(node, self.atom())
        return node

    def site(self):
        negated = False
        if self.tok[0] == "!":
            bang = self.take("!")
            if self.tok[0] != "label":
                raise TwtlSyntaxError("negation applies only to a site label", bang[2])
            negated = True
        return self.take("label")[1], negated

    def atom(self):
        kind, _, pos = self.tok
        if kind == "hold":
            self.i += 1
            duration = int(self.take("int")[1])
            label, negated = self.site()
            return Hold(duration, label, negated)
        if kind == "[":
            self.i += 1
            sub = self.or_expr()
            self.take("winclose")
            lo = int(self.take("int")[1])
            self.take(",")
            hi = int(self.take("int")[1])
            self.take("]")
            if lo > hi:
                raise TwtlSyntaxError(f"empty window [{lo},{hi}]", pos)
            return Within(sub, lo, hi)
        if kind == "(":
            self.i += 1
            node = self.or_expr()
            self.take(")")
            return node
        if kind in ("label", "!"):
            label, negated = self.site()
            return Hold(0, label, negated)
        raise TwtlSyntaxError(f"unexpected {self.tok[1] or 'end of input'!r}", pos)


def parse_formula(text: str) -> Formula:
    """Parse the ASCII concrete syntax into an AST.

    >>> parse_formula("[H^2 B]^[0,6] . [H^1 A]^[0,5]")
    Concat(left=Within(sub=Hold(duration=2, label='B', negated=False), lo=0, hi=6), right=Within(sub=Hold(duration=1, label='A', negated=False), lo=0, hi=5))
    """
    return _Parser(text).parse()


def parse_formula_file(path) -> list[Formula]:
    """One formula per non-blank line; comment lines start with ``#``."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    formulas = []
    for lineno, line in enumerate(lines, 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        try:
            formulas.append(parse_formula(text))
        except TwtlSyntaxError as exc:
            raise TwtlSyntaxError(str(exc), line=lineno) from None
    if not formulas:
        raise TwtlSyntaxError(f"no formulas in {path}")
    return formulas


_PREC = {Or: 1, And: 2, Concat: 3}
_SYM = {Or: "|", And: "&", Concat: "."}


def format_formula(phi: Formula) -> str:
    """Inverse of :func:`parse_formula` (up to whitespace and redundant parens)."""
    if isinstance(phi, Hold):
        return f"H^{phi.duration} {'!' if phi.negated else ''}{phi.label}"
    if isinstance(phi, Within):
        return f"[{format_formula(phi.sub)}]^[{phi.lo},{phi.hi}]"
    prec = _PREC[type(phi)]
    left = format_formula(phi.left)
    right = format_formula(phi.right)
    if _PREC.get(type(phi.left), 4) < prec:
        left = f"({left})"
    # binary operators associate to the left
    if _PREC.get(type(phi.right), 4) <= prec:
        right = f"({right})"
    return f"{left} {_SYM[type(phi)]} {right}"


# --------------------------------------------------------------------------
# words

def as_symbol(item) -> frozenset:
    """Normalize one word letter: a label string, ``None``/"" (no label), or an
    iterable of labels."""
    if item is None or item == "":
        return frozenset()
    if isinstance(item, str):
        return frozenset([item])
    return frozenset(item)


def as_word(items: Iterable) -> list[frozenset]:
    return [as_symbol(x) for x in items]


# --------------------------------------------------------------------------
# semantics

def _earliest_completion(phi, word, start, bounds):
    """Earliest completion tick of ``phi`` run from ``start`` or None.

    ``bounds[j]`` is the effective upper bound of window ``j`` (None: unbounded).
    """
    n = len(word)
    window_of = _window_paths(phi)
    memo = {}

    def run(node, t, path):
        key = (path, t)
        if key in memo:
            return memo[key]
        if isinstance(node, Hold):
            end = t + node.duration
            res = None
            if end < n:
                if node.negated:
                    ok = all(node.label not in word[k] for k in range(t, end + 1))
                else:
                    ok = all(node.label in word[k] for k in range(t, end + 1))
                res = end if ok else None
        elif isinstance(node, Within):
            bound = bounds[window_of[path]]
            res = None
            best = None
            last_start = n - 1 if bound is None else min(n - 1, t + bound)
            for s in range(t + node.lo, last_start + 1):
                e = run(node.sub, s, path + (0,))
                if e is not None and (best is None or e < best):
                    best = e
            if best is not None and (bound is None or best <= t + bound):
                res = best
        elif isinstance(node, Concat):
            e1 = run(node.left, t, path + (0,))
            res = None if e1 is None else run(node.right, e1 + 1, path + (1,))
        elif isinstance(node, And):
            e1 = run(node.left, t, path + (0,))
            e2 = run(node.right, t, path + (1,)) if e1 is not None else None
            res = None if e2 is None else max(e1, e2)
        else:
            e1 = run(node.left, t, path + (0,))
            e2 = run(node.right, t, path + (1,))
            cands = [e for e in (e1, e2) if e is not None]
            res = min(cands) if cands else None
        memo[key] = res
        return res

    return run(phi, start, ())


def _window_paths(phi):
    """Map tree path (tuple of child indices) of each Within to its index."""
    out = {}
    counter = [0]

    def walk(node, path):
        if isinstance(node, Within):
            walk(node.sub, path + (0,))
            out[path] = counter[0]
            counter[0] += 1
        elif isinstance(node, (Concat, And, Or)):
            walk(node.left, path + (0,))
            walk(node.right, path + (1,))

    walk(phi, ())
    return out


def _bounds(phi, tau):
    ws = windows(phi)
    if tau is None:
        return [w.hi for w in ws]
    if tau == "inf":
        return [None] * len(ws)
    tau = list(tau)
    if len(tau) != len(ws):
        raise ValueError(f"tau has {len(tau)} components, formula has {len(ws)} windows")
    return [w.hi + t for w, t in zip(ws, tau)]


def completion_tick(word: Iterable, phi: Formula, tau=None) -> Optional[int]:
    """Earliest tick at which ``word`` completes ``phi(tau)``; ``tau="inf"``
    drops every upper bound."""
    w = as_word(word)
    return _earliest_completion(phi, w, 0, _bounds(phi, tau))


def satisfies(word: Iterable, phi: Formula, tau=None) -> bool:
    """True iff ``word`` models ``phi`` relaxed by ``tau`` (default: no relaxation)."""
    return completion_tick(word, phi, tau) is not None


def minimal_relaxation(word: Iterable, phi: Formula) -> Optional[tuple[int, ...]]:
    """Minimal temporal relaxation of ``phi`` that ``word`` satisfies.

    Among all integer vectors with ``tau_j >= lo_j - hi_j`` (window stays
    non-empty) the result minimizes ``max(tau)`` and, among those, is
    lexicographically smallest; it is therefore also minimal component-wise
    (no single component can be decremented).  Returns None when no finite
    relaxation works.  Formulas without windows give ``()`` or None.
    """
    w = as_word(word)
    ws = windows(phi)
    if completion_tick(w, phi, "inf") is None:
        return None
    if not ws:
        return ()
    floor = [x.lo - x.hi for x in ws]
    # any bound >= len(w) - 1 behaves as unbounded on this word
    top = max(len(w) - 1, max(floor))

    def feasible(tau):
        return _earliest_completion(phi, w, 0, [x.hi + t for x, t in zip(ws, tau)]) is not None

    level = max(floor)
    while not feasible([max(level, f) for f in floor]):
        level += 1
        if level > top:  # pragma: no cover - guarded by the unbounded check
            return None
    tau = [max(level, f) for f in floor]
    for j in range(len(tau)):
        lo, hi = floor[j], tau[j]
        # feasibility is upward closed in each component
        while lo < hi:
            mid = (lo + hi) // 2
            trial = tau[:j] + [mid] + tau[j + 1:]
            if feasible(trial):
                hi = mid
            else:
                lo = mid + 1
        tau[j] = lo
    return tuple(tau)


def tr_norm(tau: Sequence[int]) -> int:
    """Overall relaxation ``max_j tau_j``."""
    tau = list(tau)
    if not tau:
        raise ValueError("relaxation vector is empty")
    return max(tau)
