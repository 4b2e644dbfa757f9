# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled kernel backend: same contract as pykernels, built for the
per-event hot path. Keep the two files in lockstep; test_kernels
cross-checks them on random inputs."""

IMPLEMENTATION = "cython"


cdef inline bint _values_equal(object a, object b):
    cdef bint a_sym = isinstance(a, str)
    if a_sym != isinstance(b, str):
        return False
    return a == b


def match_event(tuple cp, str name, start_ms, end_ms, tuple args):
    cdef str pname = <str> cp[0]
    cdef Py_ssize_t arity = <Py_ssize_t> cp[1]
    cdef tuple slot_ops = <tuple> cp[2]
    cdef tuple arg_ops = <tuple> cp[3]
    cdef Py_ssize_t i
    cdef int code
    cdef object payload, value, prior
    cdef tuple op

    if name != pname or len(args) != arity:
        return None
    cdef dict binding = {}
    cdef double slot_value
    for i in range(2):
        op = <tuple> slot_ops[i]
        code = <int> op[0]
        if code == 1:
            payload = op[1]
            slot_value = <double> (start_ms if i == 0 else end_ms)
            prior = binding.get(payload)
            if prior is None:
                binding[payload] = slot_value
            elif <double> prior != slot_value:
                return None
    for i in range(arity):
        op = <tuple> arg_ops[i]
        code = <int> op[0]
        if code == 0:
            continue
        payload = op[1]
        value = args[i]
        if code == 1:
            prior = binding.get(payload)
            if prior is None:
                binding[payload] = value
            elif not _values_equal(prior, value):
                return None
        elif code == 2:
            if isinstance(value, str) or value != payload:
                return None
        else:
            if not isinstance(value, str) or value != payload:
                return None
    return binding


def merge_bindings(dict a, dict b):
    if not a:
        return dict(b)
    if not b:
        return dict(a)
    cdef dict merged = dict(a)
    cdef object name, value, prior
    for name, value in b.items():
        prior = merged.get(name)
        if prior is None:
            merged[name] = value
        elif not _values_equal(prior, value):
            return None
    return merged


def eval_constraints(tuple progs, dict binding):
    cdef tuple prog, step
    cdef int code
    cdef object payload, value
    cdef double lhs, rhs
    cdef double stack[64]
    cdef Py_ssize_t top
    cdef bint ok
    for prog in progs:
        top = 0
        ok = True
        for step in prog:
            code = <int> step[0]
            if code == 0:
                stack[top] = <double> step[1]
                top += 1
            elif code == 1:
                value = binding.get(step[1])
                if isinstance(value, str) or value is None:
                    ok = False
                    break
                stack[top] = <double> value
                top += 1
            elif code == 2:
                if stack[top - 1] < 0:
                    stack[top - 1] = -stack[top - 1]
            elif code == 3:
                top -= 1
                stack[top - 1] = stack[top - 1] + stack[top]
            elif code == 4:
                top -= 1
                stack[top - 1] = stack[top - 1] - stack[top]
            elif code == 5:
                top -= 1
                stack[top - 1] = stack[top - 1] * stack[top]
            elif code == 6:
                top -= 1
                if stack[top] == 0:
                    ok = False
                    break
                stack[top - 1] = stack[top - 1] / stack[top]
            else:
                rhs = stack[top - 1]
                lhs = stack[top - 2]
                top -= 2
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


def fold_agg(int agg_code, bint use_abs, values):
    cdef double acc, v
    cdef Py_ssize_t n = 0
    cdef bint first = True
    for raw in values:
        v = <double> raw
        if use_abs and v < 0:
            v = -v
        if first:
            acc = v
            first = False
        else:
            if agg_code == 0 or agg_code == 1:
                acc += v
            elif agg_code == 2:
                if v < acc:
                    acc = v
            else:
                if v > acc:
                    acc = v
        n += 1
    if agg_code == 1:
        return acc / n
    return acc


def scan_pairs(list buf_left, list buf_right, new_seq, bint seq_required,
               tuple progs, long long range_ms, last_left, last_right):
    """Join scan for a two-leaf and/seq body; see the pykernels twin."""
    cdef list out = []
    cdef long long l_start, l_end, r_start, r_end, start, end
    cdef bint l_new, counted = last_left is not None
    cdef object el, bl, er, br, l_seq, merged
    cdef tuple pl, pr
    for pl in buf_left:
        el = pl[0]
        bl = pl[1]
        l_seq = el.seq_id
        l_start = <long long> el.start_ms
        l_end = <long long> el.end_ms
        l_new = l_seq == new_seq
        for pr in buf_right:
            er = pr[0]
            br = pr[1]
            if not l_new and er.seq_id != new_seq:
                continue
            r_start = <long long> er.start_ms
            r_end = <long long> er.end_ms
            if seq_required and l_end > r_start:
                continue
            start = l_start if l_start < r_start else r_start
            end = l_end if l_end > r_end else r_end
            if 0 <= range_ms < end - start:
                continue
            if counted and (l_seq not in last_left
                            or er.seq_id not in last_right):
                continue
            merged = merge_bindings(<dict> bl, <dict> br)
            if merged is None:
                continue
            if progs is not None and len(progs) > 0 \
                    and not eval_constraints(progs, <dict> merged):
                continue
            out.append(((l_seq, er.seq_id), merged, start, end))
    return out
