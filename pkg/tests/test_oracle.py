"""The brute-force oracle itself, plus engine equivalence."""

import pytest

from edgecep.errors import StreamTooLargeError
from edgecep.events import Event, parse_event
from edgecep.oracle import build_steps, oracle_match
from edgecep.rules import parse_rule

from trials import OP_KINDS, gen_trial, run_engine_trial


def test_worked_example_exactly_one_emission():
    rule = parse_rule("filtered_temperature[_,_](X) :- "
                      "temperature_event[_,_](X, Celsius) where(X>20)")
    stream = [parse_event("temperature_event[2000, 2200](24, Celsius)")]
    result = oracle_match(rule, stream)
    assert result.emissions == \
        frozenset({"filtered_temperature[2000, 2200](24)"})


def test_empty_stream_empty_result():
    rule = parse_rule("h[_,_](X) :- a[_,_](X)")
    assert oracle_match(rule, []).emissions == frozenset()


def test_stream_cap():
    rule = parse_rule("h[_,_](X) :- a[_,_](X)")
    stream = [Event("a", i, i, (1.0,)) for i in range(13)]
    with pytest.raises(StreamTooLargeError):
        oracle_match(rule, stream)


def test_build_steps_interleaving():
    stream = [Event("a", 0, 0), Event("b", 5, 5)]
    steps = build_steps(stream, [(0, 1), (1, 7), (2, 9)])
    assert [k for k, _ in steps] == \
        ["advance", "push", "advance", "push", "advance"]


def test_nseq_oracle_example():
    rule = parse_rule("alert[_,_]() :- a[_,_]() nseq b[_,_]() [range 2 s]")
    stream = [Event("a", 0, 0)]
    got = oracle_match(rule, stream, [(1, 2001)])
    assert got.emissions == frozenset({"alert[0, 2000]()"})
    # stream ends before the deadline: nothing emits
    assert oracle_match(rule, stream, [(1, 2000)]).emissions == frozenset()


@pytest.mark.parametrize("op", OP_KINDS)
def test_engine_equivalence_per_operator(op):
    for seed in range(150):
        rule, stream, advances = gen_trial(seed * 31 + 7, op)
        got = frozenset(run_engine_trial(rule, stream, advances))
        expected = oracle_match(rule, stream, advances).emissions
        assert got == expected, (op, seed)
