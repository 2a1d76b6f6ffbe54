"""Compiled inner loops for the learning runs.

Each loop consumes the generator exactly like the pure-Python path built from
``qcore.select_action`` and ``qcore.update``: per learner, one ``random()``
exploration coin and, only when exploring, one ``integers(0, n)`` draw; all
learners choose before any learner updates. ``best`` caches each learner's
greedy index (lowest index of the maximum) so the argmax is rescanned only
when the current maximum decreases.
"""

from __future__ import annotations

import math

import numba

FIXED = 0
EXP_DECAY = 1


@numba.njit(inline="always")
def _epsilon(kind, rate, t):
    if kind == FIXED:
        return rate
    return math.exp(-rate * t)


@numba.njit(inline="always")
def _choose(q, eps, rng, best, slot, explored):
    if rng.random() < eps:
        explored[slot] += 1
        return rng.integers(0, q.size)
    return best[slot]


@numba.njit(inline="always")
def _argmax(q):
    b = 0
    m = q[0]
    for i in range(1, q.size):
        if q[i] > m:
            m = q[i]
            b = i
    return b


@numba.njit(inline="always")
def _learn(q, a, reward, alpha, delta, best, slot):
    b = best[slot]
    old = q[a]
    new = (1.0 - alpha) * old + alpha * (reward + delta * q[b])
    q[a] = new
    if a == b:
        if new < old:
            best[slot] = _argmax(q)
    elif new > q[b] or (new == q[b] and a < b):
        best[slot] = a


@numba.njit(cache=True, nogil=True)
def single_steps(q, rewards, rng, t0, t1, alpha, delta, kind, rate, best, explored):
    for t in range(t0, t1):
        eps = _epsilon(kind, rate, t)
        a = _choose(q, eps, rng, best, 0, explored)
        _learn(q, a, rewards[a], alpha, delta, best, 0)


@numba.njit(cache=True, nogil=True)
def dual_steps(q1, q2, R1, R2, rng, t0, t1, alpha, delta, kind, rate, best, explored):
    for t in range(t0, t1):
        eps = _epsilon(kind, rate, t)
        a1 = _choose(q1, eps, rng, best, 0, explored)
        a2 = _choose(q2, eps, rng, best, 1, explored)
        _learn(q1, a1, R1[a1, a2], alpha, delta, best, 0)
        _learn(q2, a2, R2[a1, a2], alpha, delta, best, 1)
