# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels, bit-identical to the pure-Python backend."""

from libc.stdint cimport uint64_t


cdef inline uint64_t _rotl(uint64_t x, int k) noexcept nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t _splitmix_next(uint64_t *state) noexcept nogil:
    cdef uint64_t z
    state[0] = state[0] + <uint64_t>0x9E3779B97F4A7C15
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


def splitmix_stream(seed, n):
    cdef uint64_t state = <uint64_t>seed
    cdef Py_ssize_t i, count = n
    out = []
    for i in range(count):
        out.append(_splitmix_next(&state))
    return out


def xoshiro_stream(seed, n):
    cdef uint64_t state = <uint64_t>seed
    cdef uint64_t s0, s1, s2, s3, value, t
    cdef Py_ssize_t i, count = n
    s0 = _splitmix_next(&state)
    s1 = _splitmix_next(&state)
    s2 = _splitmix_next(&state)
    s3 = _splitmix_next(&state)
    out = []
    for i in range(count):
        value = _rotl(s1 * <uint64_t>5, 7) * <uint64_t>9
        t = s1 << 17
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        out.append(value)
    return out


def poisson_pair_events(seed, n_intervals, n_pairs, threshold):
    cdef uint64_t state = <uint64_t>seed
    cdef uint64_t s0, s1, s2, s3, value, t
    cdef uint64_t thr = <uint64_t>threshold
    cdef Py_ssize_t k, p, ni = n_intervals, np = n_pairs
    s0 = _splitmix_next(&state)
    s1 = _splitmix_next(&state)
    s2 = _splitmix_next(&state)
    s3 = _splitmix_next(&state)
    events = []
    for k in range(ni):
        for p in range(np):
            value = _rotl(s1 * <uint64_t>5, 7) * <uint64_t>9
            t = s1 << 17
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = _rotl(s3, 45)
            if value < thr:
                events.append((k, p))
    return events
