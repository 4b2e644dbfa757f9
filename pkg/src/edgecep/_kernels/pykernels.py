"""Pure-Python kernel backend.

These four functions are the engine's per-event hot path. The compiled
backend in _ckernels.pyx implements the same signatures with the same
observable behavior; test_kernels cross-checks them on random inputs.

Semantics pinned here (both backends must agree):
  * joining the same variable twice requires equal values (numbers
    compare numerically, symbols by text; a number never equals a
    symbol);
  * where-constraints are numeric-only: any symbol operand, or a
    division by zero, fails the constraint rather than raising.
"""

from __future__ import annotations

IMPLEMENTATION = "python"


def match_event(cp, name, start_ms, end_ms, args):
    """Unify one event against a compiled pattern.

    Returns the binding dict (possibly empty) or None. Slot variables
    bind timestamps as floats so they join and compare numerically
    with argument values.
    """
    pname, arity, slot_ops, arg_ops = cp
    if name != pname or len(args) != arity:
        return None
    binding = {}
    for (code, payload), value in (
            (slot_ops[0], float(start_ms)),
            (slot_ops[1], float(end_ms)),
    ):
        if code == 1:                      # P_VAR
            prior = binding.get(payload)
            if prior is None:
                binding[payload] = value
            elif prior != value:
                return None
    for i in range(arity):
        code, payload = arg_ops[i]
        value = args[i]
        if code == 0:                      # P_WILD
            continue
        if code == 1:                      # P_VAR
            prior = binding.get(payload)
            if prior is None:
                binding[payload] = value
            elif not _values_equal(prior, value):
                return None
        elif code == 2:                    # P_NUM
            if isinstance(value, str) or value != payload:
                return None
        else:                              # P_SYM
            if not isinstance(value, str) or value != payload:
                return None
    return binding


def _values_equal(a, b) -> bool:
    a_sym = isinstance(a, str)
    if a_sym != isinstance(b, str):
        return False
    return a == b


def merge_bindings(a, b):
    """Join two bindings; None when a shared variable disagrees."""
    if not a:
        return dict(b)
    if not b:
        return dict(a)
    merged = dict(a)
    for name, value in b.items():
        prior = merged.get(name)
        if prior is None:
            merged[name] = value
        elif not _values_equal(prior, value):
            return None
    return merged


def eval_constraints(progs, binding) -> bool:
    """Run every compiled constraint program; all must hold."""
    for prog in progs:
        stack = []
        ok = True
        for code, payload in prog:
            if code == 0:                  # R_CONST
                stack.append(payload)
            elif code == 1:                # R_LOAD
                value = binding.get(payload)
                if isinstance(value, str) or value is None:
                    ok = False
                    break
                stack.append(value)
            elif code == 2:                # R_ABS
                stack[-1] = abs(stack[-1])
            elif code == 3:
                rhs = stack.pop()
                stack[-1] = stack[-1] + rhs
            elif code == 4:
                rhs = stack.pop()
                stack[-1] = stack[-1] - rhs
            elif code == 5:
                rhs = stack.pop()
                stack[-1] = stack[-1] * rhs
            elif code == 6:
                rhs = stack.pop()
                if rhs == 0:
                    ok = False
                    break
                stack[-1] = stack[-1] / rhs
            else:                          # compare op terminates
                rhs = stack.pop()
                lhs = stack.pop()
                if code == 10:
                    ok = lhs < rhs
                elif code == 11:
                    ok = lhs > rhs
                elif code == 12:
                    ok = lhs <= rhs
                elif code == 13:
                    ok = lhs >= rhs
                elif code == 14:
                    ok = lhs == rhs
                else:
                    ok = lhs != rhs
                break
        if not ok:
            return False
    return True


def fold_agg(agg_code: int, use_abs: bool, values) -> float:
    """Aggregate a non-empty window of floats: 0 sum, 1 avg, 2 min, 3 max."""
    if use_abs:
        values = [v if v >= 0 else -v for v in values]
    if agg_code == 0:
        return float(sum(values))
    if agg_code == 1:
        return float(sum(values)) / len(values)
    if agg_code == 2:
        return float(min(values))
    return float(max(values))


def scan_pairs(buf_left, buf_right, new_seq, seq_required, progs,
               range_ms, last_left, last_right):
    """Join scan for a two-leaf and/seq body: every buffered pair that
    includes the newest event and passes precedence, window, binding,
    and constraint checks.

    range_ms < 0 means no range window; last_left/last_right are
    recency seq-id sets for a count window (None otherwise). Returns
    [((seq_l, seq_r), binding, start, end), ...] unordered.
    """
    out = []
    for el, bl in buf_left:
        l_seq = el.seq_id
        l_start = el.start_ms
        l_end = el.end_ms
        l_new = l_seq == new_seq
        for er, br in buf_right:
            if not l_new and er.seq_id != new_seq:
                continue
            if seq_required and l_end > er.start_ms:
                continue
            start = l_start if l_start < er.start_ms else er.start_ms
            end = l_end if l_end > er.end_ms else er.end_ms
            if 0 <= range_ms < end - start:
                continue
            if last_left is not None and (
                    l_seq not in last_left
                    or er.seq_id not in last_right):
                continue
            merged = merge_bindings(bl, br)
            if merged is None:
                continue
            if progs and not eval_constraints(progs, merged):
                continue
            out.append(((l_seq, er.seq_id), merged, start, end))
    return out
