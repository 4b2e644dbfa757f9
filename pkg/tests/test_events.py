"""Event literal parsing, formatting, and interval hulls."""

import random

import pytest

from edgecep.errors import EmptyInputError, ParseError, TimeOrderError
from edgecep.events import Event, format_event, hull, parse_event


def test_paper_temperature_event():
    e = parse_event("temperature_event[2000, 2200](24, Celsius)")
    assert e.name == "temperature_event"
    assert e.start_ms == 2000 and e.end_ms == 2200
    assert e.args == (24.0, "Celsius")
    assert isinstance(e.args[0], float)
    assert isinstance(e.args[1], str)


def test_zero_length_empty_args():
    e = parse_event("tick[0, 0]()")
    assert e == Event("tick", 0, 0, ())


def test_start_after_end_rejected():
    with pytest.raises(TimeOrderError):
        parse_event("a[5, 3](1)")


def test_whitespace_insignificant():
    assert parse_event("  a [ 1 ,2 ] ( 3 , x )  ") == \
        parse_event("a[1, 2](3, x)")


@pytest.mark.parametrize("bad", [
    "", "a", "a[1,2]", "a(1)", "a[1,2](", "a[1,2](1,)", "a[-1,2]()",
    "a[1,2](1) trailing", "1a[0,0]()", "a[0,0](+)", "a[0,0](1 2)",
    "a[1.5,2]()", "a[0,0](')",
])
def test_malformed_literals_rejected(bad):
    with pytest.raises((ParseError, TimeOrderError)):
        parse_event(bad)


def test_parse_error_carries_offset():
    with pytest.raises(ParseError) as exc:
        parse_event("a[1,2](1,)")
    assert exc.value.offset == 9


def test_format_paper_example():
    e = Event("filtered_temperature", 2000, 2200, (24.0, "Celsius"))
    assert format_event(e) == "filtered_temperature[2000, 2200](24, Celsius)"


def test_format_empty_args():
    assert format_event(Event("tick", 0, 0, ())) == "tick[0, 0]()"


def test_number_rendering():
    assert format_event(Event("a", 0, 0, (24.0,))) == "a[0, 0](24)"
    assert format_event(Event("a", 0, 0, (-3.0,))) == "a[0, 0](-3)"
    assert format_event(Event("a", 0, 0, (0.1,))) == "a[0, 0](0.1)"
    assert format_event(Event("a", 0, 0, (1e300,))) == "a[0, 0](1e+300)"


def _random_event(rng: random.Random) -> Event:
    name = rng.choice(["a", "sensor_2", "_x", "Evt"])
    start = rng.randint(0, 10**7)
    end = start + rng.randint(0, 10**5)
    args = []
    for _ in range(rng.randint(0, 4)):
        if rng.random() < 0.4:
            args.append(rng.choice(["red", "Celsius", "x_1"]))
        elif rng.random() < 0.5:
            args.append(float(rng.randint(-1000, 1000)))
        else:
            args.append(rng.uniform(-1e6, 1e6))
    return Event(name, start, end, tuple(args))


def test_roundtrip_1000_random_events():
    rng = random.Random(20240817)
    for _ in range(1000):
        e = _random_event(rng)
        assert parse_event(format_event(e)) == e


def test_hull_min_max():
    assert hull([Event("A", 0, 10), Event("B", 5, 30)]) == (0, 30)


def test_hull_single_event_inherits_interval():
    assert hull([Event("A", 2000, 2200)]) == (2000, 2200)


def test_hull_empty_rejected():
    with pytest.raises(EmptyInputError):
        hull([])


def test_hull_brute_force_and_order_independence():
    rng = random.Random(7)
    for _ in range(500):
        events = [_random_event(rng) for _ in range(rng.randint(1, 8))]
        lo = min(e.start_ms for e in events)
        hi = max(e.end_ms for e in events)
        assert hull(events) == (lo, hi)
        shuffled = events[:]
        rng.shuffle(shuffled)
        assert hull(shuffled) == (lo, hi)


def test_seq_id_excluded_from_equality():
    a = Event("a", 0, 1, (1.0,), seq_id=5)
    b = Event("a", 0, 1, (1.0,), seq_id=9)
    assert a == b
