import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from corpus import AVOID_THEN_SERVE, CORPUS, SURVEY
from test_twtl import formulas
from twtlplan import twtl
from twtlplan.automaton import alphabet_for, compile_relaxed_dfsa, dfsa_step
from twtlplan.errors import AlphabetError


def compile_text(text, extra=()):
    phi = twtl.parse_formula(text)
    return phi, compile_relaxed_dfsa(phi, alphabet_for(twtl.labels(phi) | set(extra)))


def words(alphabet, max_len):
    syms = sorted(alphabet, key=sorted)
    for n in range(max_len + 1):
        yield from itertools.product(syms, repeat=n)


@pytest.mark.parametrize("text", CORPUS)
def test_acceptance_matches_relaxation_feasibility(text):
    phi, aut = compile_text(text)
    max_len = 7 if len(aut.alphabet) <= 3 else 5
    for word in words(aut.alphabet, max_len):
        assert aut.accepts(word) == oracles.feasible(list(word), phi), word


@settings(max_examples=150, deadline=None)
@given(formulas(max_leaves=3), st.lists(st.sampled_from(
    [frozenset(), frozenset("A"), frozenset("B"), frozenset("C"), frozenset("AB")]), max_size=10))
def test_random_formulas_accept_exactly_feasible_words(phi, word):
    aut = compile_relaxed_dfsa(phi, {frozenset(), frozenset("A"), frozenset("B"),
                                     frozenset("C"), frozenset("AB")})
    assert aut.accepts(word) == oracles.feasible(word, phi)


def test_is_deterministic_and_trimmed():
    phi, aut = compile_text(AVOID_THEN_SERVE)
    keys = list(aut.transitions)
    assert len(keys) == len(set(keys))
    # every kept state reaches acceptance and is reachable from the initial state
    succ = {s: {d for (q, _), d in aut.transitions.items() if q == s} for s in aut.states}
    for s in aut.states:
        seen, stack = {s}, [s]
        while stack:
            for d in succ[stack.pop()]:
                if d not in seen:
                    seen.add(d)
                    stack.append(d)
        assert seen & set(aut.accepting)
    seen, stack = {aut.initial}, [aut.initial]
    while stack:
        for d in succ[stack.pop()]:
            if d not in seen:
                seen.add(d)
                stack.append(d)
    assert seen == set(aut.states)


def test_acceptance_is_absorbing():
    _, aut = compile_text(SURVEY[0])
    (acc,) = aut.accepting
    for sym in aut.alphabet:
        assert aut.step(acc, sym) == acc


@pytest.mark.parametrize("text", SURVEY + [AVOID_THEN_SERVE])
def test_size_does_not_depend_on_deadlines(text):
    phi, aut = compile_text(text)
    for factor in (2, 10):
        wider = twtl.with_upper_bounds(phi, [x.hi * factor for x in twtl.windows(phi)])
        other = compile_relaxed_dfsa(wider, aut.alphabet)
        assert (other.n_states, other.n_transitions) == (aut.n_states, aut.n_transitions)


def test_known_sizes():
    assert compile_text("H^2 A")[1].n_states == 4
    assert compile_text("[H^2 B]^[0,6]")[1].n_states == 4
    assert compile_text(SURVEY[0])[1].n_states == 6
    assert compile_text(AVOID_THEN_SERVE)[1].n_states == 16


def test_missing_alphabet_labels():
    phi = twtl.parse_formula(SURVEY[0])
    with pytest.raises(AlphabetError):
        compile_relaxed_dfsa(phi, alphabet_for({"A"}))


def test_unknown_symbol_and_dead_transition():
    _, aut = compile_text("H^1 A")
    with pytest.raises(AlphabetError):
        dfsa_step(aut, aut.initial, frozenset("Z"))
    assert dfsa_step(aut, aut.initial, frozenset()) is None


def test_empty_language():
    phi = twtl.parse_formula("H^0 A & H^0 !A")
    aut = compile_relaxed_dfsa(phi, alphabet_for({"A"}))
    assert not aut.accepting
    assert not aut.accepts([frozenset("A")])


def test_text_export():
    _, aut = compile_text("H^1 A")
    text = aut.to_text()
    assert text.startswith("# formula H^1 A")
    assert len([l for l in text.splitlines() if not l.startswith("#")]) == aut.n_transitions


@pytest.mark.parametrize("text", CORPUS)
def test_batch_oracle_agrees_with_scalar_oracle(text):
    phi = twtl.parse_formula(text)
    symbols = [frozenset()] + [frozenset([l]) for l in sorted(twtl.labels(phi))]
    for length in range(6):
        rows = oracles.all_words(len(symbols), length)
        batch = oracles.feasible_batch(phi, rows, symbols)
        for row, value in zip(rows, batch):
            assert oracles.feasible([symbols[i] for i in row], phi) == value
