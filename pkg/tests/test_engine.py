"""Engine behavior: rule management, matching semantics per operator,
windows, cascading, negation deadlines, determinism."""

import pytest

from edgecep.engine import Engine, EngineConfig
from edgecep.errors import (
    DuplicateRuleIdError, MissingWindowError, TimeRegressionError,
    UnknownRuleIdError,
)
from edgecep.events import Event, format_event, parse_event
from edgecep.rules import parse_rule

from trials import OP_KINDS, gen_trial, run_engine_trial
from edgecep.oracle import build_steps, oracle_match


def ev(text):
    return parse_event(text)


def push(engine, text):
    return [format_event(e) for e in engine.push_event(ev(text))]


@pytest.fixture
def engine():
    return Engine()


# -- rule management --

def test_duplicate_rule_id(engine):
    ast = parse_rule("c[_,_]() :- a[_,_]()")
    engine.add_rule("r", ast)
    with pytest.raises(DuplicateRuleIdError):
        engine.add_rule("r", ast)


def test_binary_rule_requires_window(engine):
    ast = parse_rule("c[_,_]() :- a[_,_]() and b[_,_]()")
    with pytest.raises(MissingWindowError):
        engine.add_rule("r", ast)


def test_default_range_fills_missing_window():
    engine = Engine(EngineConfig(default_range_ms=5000))
    engine.add_rule("r", parse_rule("c[_,_]() :- a[_,_]() and b[_,_]()"))
    push(engine, "a[0, 0]()")
    assert push(engine, "b[1000, 1000]()") == ["c[0, 1000]()"]


def test_remove_rule(engine):
    engine.add_rule("r", parse_rule("c[_,_](X) :- a[_,_](X)"))
    engine.remove_rule("r")
    assert push(engine, "a[0, 0](1)") == []
    with pytest.raises(UnknownRuleIdError):
        engine.remove_rule("r")


def test_add_remove_readd_buffers_empty(engine):
    ast = parse_rule("c[_,_]() :- a[_,_]() and b[_,_]() [range 10 s]")
    engine.add_rule("r", ast)
    push(engine, "a[0, 0]()")
    engine.remove_rule("r")
    engine.add_rule("r", ast)
    # the old a is gone with the old buffers: no match
    assert push(engine, "b[1, 1]()") == []
    push(engine, "a[2, 2]()")
    assert push(engine, "b[3, 3]()") == ["c[2, 3]()"]


def test_rule_injection_not_retroactive(engine):
    push(engine, "a[0, 0](1)")
    engine.add_rule("r", parse_rule("c[_,_](X) :- a[_,_](X)"))
    assert push(engine, "a[1, 1](2)") == ["c[1, 1](2)"]


# -- the worked example --

def test_worked_example_emission(engine):
    engine.add_rule("filter", parse_rule(
        "filtered_temperature[_,_](X) :- "
        "temperature_event[_,_](X, Celsius) where(X>20)"))
    out = push(engine, "temperature_event[2000, 2200](24, Celsius)")
    assert out == ["filtered_temperature[2000, 2200](24)"]


def test_worked_example_below_threshold(engine):
    engine.add_rule("filter", parse_rule(
        "filtered_temperature[_,_](X) :- "
        "temperature_event[_,_](X, Celsius) where(X>20)"))
    assert push(engine, "temperature_event[0, 0](18, Celsius)") == []


# -- cascading --

def test_two_step_cascade(engine):
    engine.add_rule("r1", parse_rule("b[_,_](X) :- a[_,_](X)"))
    engine.add_rule("r2", parse_rule("c[_,_](X) :- b[_,_](X)"))
    assert push(engine, "a[0, 0](1)") == ["b[0, 0](1)", "c[0, 0](1)"]


def test_cascade_depth_limit(engine):
    engine.add_rule("loop", parse_rule("x[_,_](V) :- x[_,_](V)"))
    out = push(engine, "x[0, 0](1)")
    assert len(out) == 8
    kinds = [d.kind for d in engine.diagnostics]
    assert kinds == ["cascade-depth"]


# -- and / seq / or --

def _and_engine():
    engine = Engine()
    engine.add_rule("cs", parse_rule(
        "complex_sequence[_,_](X, Y) :- eventA[_,_](X) and "
        "eventB[_,_](Y) where(X<Y) [range 5 s]"))
    return engine


def test_and_in_order():
    engine = _and_engine()
    push(engine, "eventA[0, 0](1)")
    assert push(engine, "eventB[3000, 3000](2)") == \
        ["complex_sequence[0, 3000](1, 2)"]


def test_and_order_free():
    engine = _and_engine()
    push(engine, "eventB[3000, 3000](2)")
    assert push(engine, "eventA[0, 0](1)") == \
        ["complex_sequence[0, 3000](1, 2)"]


def test_and_constraint_filters():
    engine = _and_engine()
    push(engine, "eventA[0, 0](1)")
    assert push(engine, "eventB[3000, 3000](0.5)") == []


def test_and_window_exceeded():
    engine = _and_engine()
    push(engine, "eventA[0, 0](1)")
    assert push(engine, "eventB[6000, 6000](2)") == []


def test_and_window_boundary_inclusive():
    engine = _and_engine()
    push(engine, "eventA[0, 0](1)")
    assert push(engine, "eventB[5000, 5000](2)") == \
        ["complex_sequence[0, 5000](1, 2)"]


def test_seq_touching_boundary(engine):
    engine.add_rule("s", parse_rule(
        "out[_,_]() :- a[_,_]() seq b[_,_]() [range 60 s]"))
    push(engine, "a[0, 10]()")
    assert push(engine, "b[10, 20]()") == ["out[0, 20]()"]


def test_seq_wrong_order(engine):
    engine.add_rule("s", parse_rule(
        "out[_,_]() :- a[_,_]() seq b[_,_]() [range 60 s]"))
    push(engine, "b[0, 10]()")
    assert push(engine, "a[20, 30]()") == []


def test_seq_overlap_rejected(engine):
    engine.add_rule("s", parse_rule(
        "out[_,_]() :- a[_,_]() seq b[_,_]() [range 60 s]"))
    push(engine, "a[0, 15]()")
    assert push(engine, "b[10, 20]()") == []


def test_or_each_branch_emits(engine):
    engine.add_rule("h", parse_rule("h[_,_](X) :- a[_,_](X) or b[_,_](X)"))
    assert push(engine, "a[0, 0](7)") == ["h[0, 0](7)"]
    assert push(engine, "b[5, 5](9)") == ["h[5, 5](9)"]
    # exactly one emission per event, never a joined pair
    assert push(engine, "a[6, 6](1)") == ["h[6, 6](1)"]


# -- nseq --

def _nseq_engine(window="[range 2 s]"):
    engine = Engine()
    engine.add_rule("alert", parse_rule(
        f"alert[_,_]() :- a[_,_]() nseq b[_,_]() {window}"))
    return engine


def test_nseq_matures_via_advance():
    engine = _nseq_engine()
    push(engine, "a[0, 0]()")
    assert [format_event(e) for e in engine.advance_time(2000)] == []
    assert [format_event(e) for e in engine.advance_time(2001)] == \
        ["alert[0, 2000]()"]


def test_nseq_witnessed_never_emits():
    engine = _nseq_engine()
    push(engine, "a[0, 0]()")
    push(engine, "b[1000, 1000]()")
    assert engine.advance_time(10000) == []


def test_nseq_prior_negative_irrelevant():
    engine = _nseq_engine()
    push(engine, "b[0, 0]()")
    push(engine, "a[100, 100]()")
    out = [format_event(e) for e in engine.advance_time(9999)]
    assert out == ["alert[100, 2100]()"]


def test_nseq_matures_via_push():
    engine = _nseq_engine()
    push(engine, "a[0, 0]()")
    out = push(engine, "c[5000, 5000]()")     # unrelated event moves time
    assert out == ["alert[0, 2000]()"]


def test_nseq_join_on_variable():
    engine = Engine()
    engine.add_rule("alert", parse_rule(
        "alert[_,_](X) :- a[_,_](X) nseq b[_,_](X) [range 1 s]"))
    push(engine, "a[0, 0](1)")
    push(engine, "b[500, 500](2)")            # different value: no block
    assert [format_event(e) for e in engine.advance_time(1001)] == \
        ["alert[0, 1000](1)"]


# -- kseq --

def test_kseq_collapses_per_terminator(engine):
    engine.add_rule("k", parse_rule(
        "k[_,_](X) :- a[_,_](X) kseq b[_,_]() [range 60 s]"))
    push(engine, "a[0, 0](1)")
    push(engine, "a[10, 10](2)")
    assert push(engine, "b[20, 20]()") == ["k[0, 20](2)"]


def test_kseq_no_repetition_no_emission(engine):
    engine.add_rule("k", parse_rule(
        "k[_,_]() :- a[_,_]() kseq b[_,_]() [range 60 s]"))
    assert push(engine, "b[0, 0]()") == []


def test_kseq_vs_seq_distinction():
    kseq = Engine()
    kseq.add_rule("k", parse_rule(
        "out[_,_]() :- a[_,_](_) kseq b[_,_]() [range 60 s]"))
    seq = Engine()
    seq.add_rule("s", parse_rule(
        "out[_,_]() :- a[_,_](_) seq b[_,_]() [range 60 s]"))
    stream = ["a[0, 0](1)", "a[10, 10](2)", "b[20, 20]()"]
    k_out = [line for text in stream for line in push(kseq, text)]
    s_out = [line for text in stream for line in push(seq, text)]
    assert len(k_out) == 1          # one per terminator
    assert len(s_out) == 2          # one per repetition


# -- lambda --

def test_lambda_count_five_average(engine):
    engine.add_rule("avg", parse_rule(
        "temp_avg[_,_](Y) :- lambda { temperature_event(X, Celsius), *, "
        "Y := avg(X) } [count 5]"))
    values = [20, 21, 22, 23]
    for i, v in enumerate(values):
        assert push(engine,
                    f"temperature_event[{i}, {i}]({v}, Celsius)") == []
    assert push(engine, "temperature_event[4, 4](24, Celsius)") == \
        ["temp_avg[0, 4](22)"]
    assert push(engine, "temperature_event[5, 5](30, Celsius)") == \
        ["temp_avg[1, 5](24)"]


def test_lambda_min_abs_composition(engine):
    engine.add_rule("m", parse_rule(
        "m[_,_](Y) :- lambda { v(X), *, Y := min(abs(X)) } [count 2]"))
    push(engine, "v[0, 0](-3)")
    assert push(engine, "v[1, 1](5)") == ["m[0, 1](3)"]


def test_lambda_range_window(engine):
    engine.add_rule("avg", parse_rule(
        "s[_,_](Y) :- lambda { a(X), *, Y := avg(X) } [range 10 s]"))
    assert push(engine, "a[0, 0](1)") == ["s[0, 0](1)"]
    assert push(engine, "a[5000, 5000](3)") == ["s[0, 5000](2)"]
    # first sample now outside the 10 s range
    assert push(engine, "a[11000, 11000](5)") == ["s[5000, 11000](4)"]


def test_lambda_symbol_samples_skipped(engine):
    engine.add_rule("avg", parse_rule(
        "s[_,_](Y) :- lambda { a(X), *, Y := sum(X) } [count 2]"))
    push(engine, "a[0, 0](red)")
    push(engine, "a[1, 1](1)")
    assert push(engine, "a[2, 2](2)") == ["s[1, 2](3)"]


# -- time --

def test_advance_time_noop_at_watermark(engine):
    push(engine, "a[0, 500]()")
    assert engine.advance_time(500) == []


def test_time_regression_rejected(engine):
    engine.advance_time(5)
    with pytest.raises(TimeRegressionError):
        engine.advance_time(4)


def test_watermark_monotone_under_stale_events(engine):
    push(engine, "a[0, 9000]()")
    push(engine, "a[0, 10]()")       # stale arrival accepted
    assert engine.watermark_ms == 9000


def test_stale_event_still_joins(engine):
    engine.add_rule("r", parse_rule(
        "out[_,_]() :- a[_,_]() and b[_,_]() [range 10 s]"))
    push(engine, "a[1000, 9000]()")
    assert push(engine, "b[2000, 2500]()") == ["out[1000, 9000]()"]


def test_eviction_blocks_expired_joins(engine):
    engine.add_rule("r", parse_rule(
        "out[_,_]() :- a[_,_]() and b[_,_]() [range 1 s]"))
    push(engine, "a[0, 10]()")
    push(engine, "c[0, 60000]()")    # advance watermark far past retention
    # a evicted; a stale b that would have joined finds nothing
    assert push(engine, "b[5, 900]()") == []


def test_buffer_overflow_diagnostic():
    engine = Engine(EngineConfig(max_buffer_events=4))
    engine.add_rule("r", parse_rule(
        "out[_,_]() :- a[_,_]() and b[_,_]() [count 2]"))
    for i in range(6):
        push(engine, f"a[{i}, {i}]()")
    assert any(d.kind == "buffer-overflow" for d in engine.diagnostics)


# -- determinism and oracle spot-checks --

def test_identical_runs_are_byte_identical():
    for op in OP_KINDS:
        rule, stream, advances = gen_trial(1234, op)
        first = run_engine_trial(rule, stream, advances)
        second = run_engine_trial(rule, stream, advances)
        assert first == second


def test_engine_matches_oracle_small_batch():
    for op in OP_KINDS:
        for seed in range(40):
            rule, stream, advances = gen_trial(seed * 977 + 5, op)
            got = frozenset(run_engine_trial(rule, stream, advances))
            expected = oracle_match(rule, stream, advances).emissions
            assert got == expected, (op, seed)
