"""Cardinality-constrained maximizers plus double greedy.

Tie-break everywhere: among equal gains, the smallest element id wins.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError
from .objectives import Objective

MAX_BRUTE_FORCE = 20


@dataclass
class Solution:
    selected: list[int]
    value: float
    step_gains: list[float]
    algorithm: str
    k: int
    wall_time: float = 0.0
    evals_used: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self, timings: bool = True) -> dict:
        d = {
            "algorithm": self.algorithm,
            "k": self.k,
            "selected": list(self.selected),
            "value": self.value,
            "step_gains": list(self.step_gains),
            "wall_time_s": self.wall_time if timings else None,
            "evals_used": self.evals_used,
        }
        d.update(self.extra)
        return d


@dataclass(frozen=True)
class SieveConfig:
    n_thresholds: int = 50
    memory_cap_per_threshold: int | None = None  # defaults to k

    def __post_init__(self):
        if self.n_thresholds < 1:
            raise InputError("n_thresholds must be >= 1")


def _ground(objective: Objective, ground) -> np.ndarray:
    if ground is None:
        return np.arange(objective.n, dtype=np.int64)
    return objective._ids(ground)


def _check_k(k):
    if k < 0:
        raise InputError("k must be nonnegative")
    return int(k)


def greedy(objective: Objective, ground=None, k: int = 1) -> Solution:
    """Plain greedy: each step scans every remaining candidate."""
    k = _check_k(k)
    t0 = time.perf_counter()
    remaining = _ground(objective, ground)
    ctx = objective.context()
    selected, gains = [], []
    evals = 0
    for _ in range(min(k, len(remaining))):
        g = ctx.gains(remaining)
        evals += len(remaining)
        i = int(np.argmax(g))  # first max = smallest id, remaining is sorted
        if g[i] <= 0:
            break
        v = int(remaining[i])
        ctx.commit(v)
        selected.append(v)
        gains.append(float(g[i]))
        remaining = np.delete(remaining, i)
    return Solution(selected, objective.value(selected), gains, "greedy", k,
                    time.perf_counter() - t0, evals)


def lazy_greedy(objective: Objective, ground=None, k: int = 1) -> Solution:
    """Accelerated greedy with a max-heap of stale upper bounds.

    Selects exactly what :func:`greedy` selects.  ``extra["reinsertions"]``
    counts elements whose refreshed gain no longer topped the heap.
    """
    k = _check_k(k)
    t0 = time.perf_counter()
    cand = _ground(objective, ground)
    ctx = objective.context()
    selected, gains = [], []
    if k == 0 or len(cand) == 0:
        return Solution([], 0.0, [], "lazy_greedy", k, time.perf_counter() - t0, 0,
                        {"reinsertions": 0})
    first = ctx.gains(cand)
    evals = len(cand)
    # (negated gain, id, step at which the gain was computed)
    heap = list(zip((-first).tolist(), cand.tolist(), itertools.repeat(0)))
    heapq.heapify(heap)
    step = 0
    reinsertions = 0
    while heap and step < k:
        neg, v, stamp = heap[0]
        if stamp == step:
            heapq.heappop(heap)
            if -neg <= 0:
                break
            ctx.commit(v)
            selected.append(v)
            gains.append(-neg)
            step += 1
            continue
        g = ctx.gain(v)
        evals += 1
        heapq.heapreplace(heap, (-g, v, step))
        if heap[0][1] != v:
            reinsertions += 1
    return Solution(selected, objective.value(selected), gains, "lazy_greedy", k,
                    time.perf_counter() - t0, evals, {"reinsertions": reinsertions})


def sieve_streaming(objective: Objective, stream: Sequence[int], k: int,
                    cfg: SieveConfig | None = None) -> Solution:
    """One-pass threshold sieve.

    Thresholds live on the lattice rho**i with rho = (2k)**(1/(N-1)); the
    active window is the N lattice points starting at the max singleton
    value seen so far, so it spans [m, 2km].  Each threshold keeps its own
    candidate set and accepts v when f(v|S) >= (tau/2 - f(S)) / (k - |S|).
    """
    k = _check_k(k)
    cfg = cfg or SieveConfig()
    cap = k if cfg.memory_cap_per_threshold is None else min(k, cfg.memory_cap_per_threshold)
    t0 = time.perf_counter()
    N = cfg.n_thresholds
    log_rho = math.log(2 * k) / max(N - 1, 1) if k > 0 else 1.0
    m = 0.0
    sieves: dict[int, tuple] = {}  # lattice index -> (context, members list, gains)
    retained = peak = 0
    evals = 0
    seen = set()
    for v in stream:
        v = objective._check_id(v)
        if k == 0:
            break
        if v in seen:
            raise InputError(f"element {v} appears twice in the stream")
        seen.add(v)
        single = float(objective.singleton_values([v])[0])
        evals += 1
        if single > m:
            m = single
            lo = math.ceil(math.log(m) / log_rho - 1e-12)
            window = range(lo, lo + N)
            for i in [i for i in sieves if i not in window]:
                retained -= len(sieves.pop(i)[1])
            for i in window:
                if i not in sieves:
                    sieves[i] = (objective.context(), [], [])
        if m <= 0:
            continue
        for i in sorted(sieves):
            ctx, members, gains = sieves[i]
            if len(members) >= cap:
                continue
            tau = math.exp(i * log_rho)
            g = ctx.gain(v)
            evals += 1
            if g >= (tau / 2 - ctx.value) / (k - len(members)):
                ctx.commit(v)
                members.append(v)
                gains.append(g)
                retained += 1
        peak = max(peak, retained)
    best_i, best_val = None, -math.inf
    for i in sorted(sieves):
        if sieves[i][0].value > best_val:
            best_i, best_val = i, sieves[i][0].value
    if best_i is None:
        selected, gains = [], []
    else:
        selected, gains = list(sieves[best_i][1]), list(sieves[best_i][2])
    return Solution(selected, objective.value(selected), gains, "sieve_streaming", k,
                    time.perf_counter() - t0, evals,
                    {"peak_retained": peak, "n_thresholds": N})


def brute_force_max(objective: Objective, ground=None, k: int = 1) -> Solution:
    """Exact optimum over subsets of size <= k; ties go to the lexicographically smallest."""
    k = _check_k(k)
    t0 = time.perf_counter()
    ids = _ground(objective, ground)
    if len(ids) > MAX_BRUTE_FORCE:
        raise InputError(f"brute force refused for |ground| = {len(ids)} > {MAX_BRUTE_FORCE}")
    best, best_val = (), 0.0
    evals = 0
    for size in range(1, min(k, len(ids)) + 1):
        for combo in itertools.combinations(ids.tolist(), size):
            val = objective.value(combo)
            evals += 1
            if val > best_val or (val == best_val and combo < best):
                best, best_val = combo, val
    gains, prefix = [], []
    for v in best:
        gains.append(objective.gain(v, prefix))
        prefix.append(v)
    return Solution(list(best), best_val, gains, "brute_force", k,
                    time.perf_counter() - t0, evals)


def double_greedy(objective: Objective, ground=None, mode: str = "deterministic",
                  seed: int | None = None) -> list[int]:
    """One pass over ``ground`` (ascending ids) keeping X ⊆ Y; returns the final X.

    ``deterministic`` is the 1/3-approximation; ``randomized`` the
    1/2-in-expectation variant, drawing from ``seed``.
    """
    if mode not in ("deterministic", "randomized"):
        raise InputError(f"unknown double greedy mode {mode!r}")
    ids = _ground(objective, ground)
    rng = np.random.default_rng(seed) if mode == "randomized" else None
    lower = objective.context(())
    upper = objective.context(ids)
    for u in ids.tolist():
        a = lower.gain(u)
        b = upper.loss(u)
        if rng is None:
            take = a >= b
        else:
            a, b = max(a, 0.0), max(b, 0.0)
            take = True if a + b == 0 else rng.random() < a / (a + b)
        if take:
            lower.commit(u)
        else:
            upper.remove(u)
    return sorted(lower.current_set)
