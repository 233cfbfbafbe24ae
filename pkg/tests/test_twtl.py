import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from twtlplan import twtl
from twtlplan.errors import TwtlSyntaxError
from twtlplan.twtl import And, Concat, Hold, Or, Within

PHI1 = "[H^2 B]^[0,6] . [H^1 A]^[0,5]"
NESTED = "[H^5 !C]^[0,5] . [H^2 A & [H^2 B]^[0,6]]^[1,10]"


def w(text):
    """Word from a compact string: letters are labels, '.' is the empty label-set."""
    return [frozenset() if c == "." else frozenset([c]) for c in text]


# ------------------------------------------------------------------ parsing

def test_parse_sequence_of_windows():
    assert twtl.parse_formula(PHI1) == Concat(Within(Hold(2, "B"), 0, 6),
                                              Within(Hold(1, "A"), 0, 5))


def test_parse_smallest_formula():
    assert twtl.parse_formula("H^0 A") == Hold(0, "A", False)


def test_bare_label_is_zero_hold():
    assert twtl.parse_formula("A") == Hold(0, "A")
    assert twtl.parse_formula("!A") == Hold(0, "A", True)


def test_precedence_or_and_concat():
    phi = twtl.parse_formula("A | B & C . D")
    assert phi == Or(Hold(0, "A"), And(Hold(0, "B"), Concat(Hold(0, "C"), Hold(0, "D"))))


def test_binary_operators_associate_left():
    assert twtl.parse_formula("A . B . C") == Concat(Concat(Hold(0, "A"), Hold(0, "B")),
                                                    Hold(0, "C"))


def test_nested_windows_are_numbered_inner_first():
    phi = twtl.parse_formula(NESTED)
    assert [(x.lo, x.hi) for x in twtl.windows(phi)] == [(0, 5), (0, 6), (1, 10)]


@pytest.mark.parametrize("text", ["[H^2 A]^[5,3]", "H^2", "[H^1 A]^[0,", "A &", "!(A . B)",
                                  "!H^1 A", "(A", "A B", "H^-1 A", ""])
def test_parse_errors(text):
    with pytest.raises(TwtlSyntaxError):
        twtl.parse_formula(text)


def test_syntax_error_reports_position():
    with pytest.raises(TwtlSyntaxError) as info:
        twtl.parse_formula("[H^1 A]^[0,3] . ?")
    assert info.value.position == 16


def test_formula_file(tmp_path):
    f = tmp_path / "f.txt"
    f.write_text("# comment\n\nH^1 A\n[H^2 B]^[0,3]\n")
    assert twtl.parse_formula_file(f) == [Hold(1, "A"), Within(Hold(2, "B"), 0, 3)]
    f.write_text("H^1 A\n[H^2 B]^[4,3]\n")
    with pytest.raises(TwtlSyntaxError) as info:
        twtl.parse_formula_file(f)
    assert info.value.line == 2
    f.write_text("# nothing here\n")
    with pytest.raises(TwtlSyntaxError):
        twtl.parse_formula_file(f)


LABELS = st.sampled_from("ABC")


def formulas(max_leaves=4):
    hold = st.builds(Hold, st.integers(0, 2), LABELS, st.booleans())

    def extend(children):
        window = st.tuples(children, st.integers(0, 2), st.integers(0, 4)).map(
            lambda t: Within(t[0], t[1], t[1] + t[2]))
        binary = st.tuples(st.sampled_from([Concat, And, Or]), children, children).map(
            lambda t: t[0](t[1], t[2]))
        return window | binary

    return st.recursive(hold, extend, max_leaves=max_leaves)


@given(formulas())
def test_format_parse_roundtrip(phi):
    assert twtl.parse_formula(twtl.format_formula(phi)) == phi


# ---------------------------------------------------------------- semantics

def test_hold_semantics():
    phi = Hold(2, "A")
    assert twtl.satisfies(w("AAA"), phi)
    assert not twtl.satisfies(w("BAA"), phi)
    assert not twtl.satisfies(w("AA"), phi)


def test_phi1_example_word():
    phi = twtl.parse_formula(PHI1)
    word = w("BBBCAA")
    assert oracles.sat(word, phi)
    assert twtl.satisfies(word, phi)
    assert twtl.minimal_relaxation(word, phi) == (-4, -3)


def test_concat_splits_at_earliest_completion():
    # the B hold finishes at tick 1, so A must start at tick 2
    phi = twtl.parse_formula("H^1 B . H^0 A")
    assert twtl.satisfies(w("BBA"), phi)
    assert not twtl.satisfies(w("BBBA"), phi)


def test_nested_example_nominal():
    phi = twtl.parse_formula(NESTED)
    # no C in 0..5; the outer window opens at 6 + 1, where A and B are both held 2 ticks
    word = w(".......") + [frozenset("AB")] * 3
    assert oracles.sat(word, phi)
    assert twtl.satisfies(word, phi)
    tau = twtl.minimal_relaxation(word, phi)
    assert tau == (0, -4, -7)


def test_late_block_needs_positive_relaxation():
    phi = twtl.parse_formula("[H^2 B]^[0,6]")
    word = w(".....BBB")  # block ends at tick 7
    taus = oracles.all_feasible_taus(word, phi)
    assert min(t[0] for t in taus) == 1
    assert twtl.minimal_relaxation(word, phi) == (1,)


def test_missing_label_is_infeasible():
    phi = twtl.parse_formula("[H^1 A]^[0,5]")
    assert twtl.minimal_relaxation(w("BBBBBBBB"), phi) is None


def test_formula_without_windows():
    assert twtl.minimal_relaxation(w("A"), Hold(0, "A")) == ()
    assert twtl.minimal_relaxation(w("B"), Hold(0, "A")) is None


def test_exact_satisfaction_gives_nonpositive_tau():
    phi = twtl.parse_formula(PHI1)
    tau = twtl.minimal_relaxation(w("BBBAA"), phi)
    assert tau is not None and max(tau) <= 0


def test_tau_length_checked():
    with pytest.raises(ValueError):
        twtl.satisfies(w("A"), twtl.parse_formula(PHI1), (0,))


@pytest.mark.parametrize("tau,expected", [((2, -1, 0), 2), ((-1, -1), -1), ((0,), 0)])
def test_tr_norm(tau, expected):
    assert twtl.tr_norm(tau) == expected


def test_tr_norm_empty():
    with pytest.raises(ValueError):
        twtl.tr_norm(())


WORDS = st.lists(st.sampled_from([frozenset(), frozenset("A"), frozenset("B"),
                                  frozenset("C"), frozenset("AB")]), max_size=9)


@settings(max_examples=300, deadline=None)
@given(formulas(), WORDS)
def test_satisfies_matches_tabulated_oracle(phi, word):
    assert twtl.satisfies(word, phi) == oracles.sat(word, phi)
    assert (twtl.completion_tick(word, phi, "inf") is not None) == oracles.feasible(word, phi)


@settings(max_examples=200, deadline=None)
@given(formulas(max_leaves=3), WORDS)
def test_minimal_relaxation_against_enumeration(phi, word):
    tau = twtl.minimal_relaxation(word, phi)
    n_windows = len(oracles.post_order_windows(phi))
    if not oracles.feasible(word, phi):
        assert tau is None
        return
    if n_windows == 0:
        assert tau == ()
        return
    feasible = set(oracles.all_feasible_taus(word, phi))
    assert tau in feasible
    # minimal overall relaxation, then lexicographically smallest
    best = min(max(t) for t in feasible)
    assert max(tau) == best
    assert tau == min(t for t in feasible if max(t) == best)
    # no component can be lowered
    for j in range(len(tau)):
        lowered = tau[:j] + (tau[j] - 1,) + tau[j + 1:]
        assert lowered not in feasible


@settings(max_examples=100, deadline=None)
@given(formulas(max_leaves=3), WORDS, st.integers(0, 4))
def test_relaxation_is_monotone(phi, word, bump):
    # loosening any deadline never breaks satisfaction
    tau = twtl.minimal_relaxation(word, phi)
    if not tau:
        return
    for j in range(len(tau)):
        looser = tau[:j] + (tau[j] + bump,) + tau[j + 1:]
        assert twtl.satisfies(word, phi, looser)


def test_with_upper_bounds_and_labels():
    phi = twtl.parse_formula(NESTED)
    doubled = twtl.with_upper_bounds(phi, [2 * x.hi for x in twtl.windows(phi)])
    assert [x.hi for x in twtl.windows(doubled)] == [10, 12, 20]
    assert twtl.labels(phi) == {"A", "B", "C"}


def test_words_accept_strings_and_sets():
    assert twtl.as_word(["A", None, "", {"A", "B"}]) == [
        frozenset("A"), frozenset(), frozenset(), frozenset("AB")]


def test_exhaustive_small_words_phi1():
    phi = twtl.parse_formula(PHI1)
    for n in range(0, 8):
        for letters in itertools.product("AB.", repeat=n):
            word = w("".join(letters))
            assert twtl.satisfies(word, phi) == oracles.sat(word, phi)
