"""The submodularity graph.

Edge u -> v carries w_uv = f(v|u) - f(u|V-u): the worst-case net loss of
dropping v while keeping u.  Edges are computed on demand in U x V blocks;
the full n x n table is never built.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

import numpy as np

from ._parallel import get_threads, ordered_map
from .errors import InputError, InvariantError
from .objectives import TOL, GainContext, Objective

MAX_EXACT_SPARSIFIER = 12
_BLOCK_CELLS = 4_000_000


@dataclass(frozen=True)
class GlobalGains:
    """g[u] = f(u | V - u) against a fixed reference ground set V.

    ``g`` is indexed by element id; ids outside the reference hold NaN.
    """

    g: np.ndarray
    reference: np.ndarray

    def __getitem__(self, u):
        val = self.g[u]
        if np.any(np.isnan(val)):
            raise InputError(f"element {u} is outside the reference ground set")
        return val


def compute_global_gains(objective: Objective, V: Iterable[int]) -> GlobalGains:
    ids = objective._ids(V)
    if ids.size == 0:
        raise InputError("reference ground set must be nonempty")
    g = np.full(objective.n, np.nan)
    g[ids] = objective.global_gains(ids)
    singles = objective.singleton_values(ids)
    worst = np.max(g[ids] - singles)
    if worst > TOL:
        raise InvariantError(f"global gain exceeds singleton value by {worst:g}; "
                             "objective is not submodular")
    return GlobalGains(g, ids)


class GraphWeights:
    """Edge weights of the submodularity graph over a reference ground set."""

    def __init__(self, objective: Objective, reference_ground: Iterable[int] | None = None,
                 globals_: GlobalGains | None = None):
        self.objective = objective
        if globals_ is None:
            ref = range(objective.n) if reference_ground is None else reference_ground
            globals_ = compute_global_gains(objective, ref)
        self.globals = globals_
        self.reference_ground = globals_.reference
        self.weight_evals = 0

    @property
    def g(self) -> np.ndarray:
        return self.globals.g

    def _tail(self, u) -> float:
        return float(self.globals[int(u)])

    def edge_weight(self, u: int, v: int) -> float:
        u = self.objective._check_id(u)
        v = self.objective._check_id(v)
        gu = self._tail(u)
        self.weight_evals += 1
        if u == v:
            return -gu
        return self.objective.gain(v, [u]) - gu

    def conditional_edge_weight(self, u: int, v: int, S: Iterable[int]) -> float:
        u = self.objective._check_id(u)
        v = self.objective._check_id(v)
        S = set(self.objective._ids(S).tolist())
        if u in S or v in S:
            raise InputError("u and v must lie outside the conditioning set")
        if u == v:
            raise InputError("conditional edge weight needs u != v")
        self.weight_evals += 1
        return self.objective.gain(v, S | {u}) - self._tail(u)

    def weight_block(self, U, V) -> np.ndarray:
        """``W[i, j] = w(U[i], V[j])``."""
        U = np.asarray(U, dtype=np.int64)
        V = np.asarray(V, dtype=np.int64)
        self.weight_evals += U.size * V.size
        return self._block(U, V)

    def _block(self, U, V):
        gu = self.globals[U] if U.size else np.zeros(0)
        return self.objective.pairwise_gains(U, V) - gu[:, None]

    def divergence(self, U: Iterable[int], v: int) -> float:
        U = np.asarray(sorted(set(int(x) for x in U)), dtype=np.int64)
        if U.size == 0:
            raise InputError("divergence needs a nonempty source set")
        v = self.objective._check_id(v)
        return float(self.weight_block(U, [v]).min())

    def divergence_all(self, U: Iterable[int], V_rest: Iterable[int]) -> np.ndarray:
        """min over u in U of w(u, v), for every v in ``V_rest`` (order kept)."""
        U = np.asarray(list(U), dtype=np.int64)
        V = np.asarray(list(V_rest), dtype=np.int64)
        if U.size == 0:
            raise InputError("divergence needs a nonempty source set")
        if V.size == 0:
            return np.zeros(0)
        rows = max(1, _BLOCK_CELLS // max(V.size, 1))
        col_chunks = np.array_split(V, max(1, min(get_threads(), len(V))))

        def run(cols):
            out = np.full(cols.size, np.inf)
            for lo in range(0, U.size, rows):
                np.minimum(out, self._block(U[lo:lo + rows], cols).min(axis=0), out=out)
            return out

        self.weight_evals += U.size * V.size
        return np.concatenate(ordered_map(run, col_chunks))

    def conditional_divergence(self, U: Iterable[int], v: int, S: Iterable[int]) -> float:
        U = [int(x) for x in U if int(x) != int(v)]
        if not U:
            raise InputError("divergence needs a nonempty source set")
        return min(self.conditional_edge_weight(u, v, S) for u in U)


# module-level functional forms
def edge_weight(weights: GraphWeights, u: int, v: int) -> float:
    return weights.edge_weight(u, v)


def conditional_edge_weight(weights: GraphWeights, u: int, v: int, S) -> float:
    return weights.conditional_edge_weight(u, v, S)


def divergence(weights: GraphWeights, U, v: int) -> float:
    return weights.divergence(U, v)


def divergence_all(weights: GraphWeights, U, V_rest) -> np.ndarray:
    return weights.divergence_all(U, V_rest)


@dataclass
class SparsificationInstance:
    """h(V') = |{v in ground - V' : min_{x in V'} w(x, v) <= epsilon}|.

    ``ground`` is the domain of h; it defaults to the weights' reference set
    but may be any subset of it (post-reduction works on a pruned set while
    keeping the original global gains).
    """

    weights: GraphWeights
    epsilon: float
    ground: np.ndarray | None = None

    def __post_init__(self):
        if np.isnan(self.epsilon):
            raise InputError("epsilon must be a number")
        ref = self.weights.reference_ground
        if self.ground is None:
            self.ground = ref.copy()
        else:
            self.ground = np.unique(np.asarray(list(self.ground), dtype=np.int64))
            if not np.all(np.isin(self.ground, ref)):
                raise InputError("h ground must lie inside the reference ground set")
        self._cover = None

    def coverage(self) -> np.ndarray:
        """Boolean ``A[i, j] = w(ground[i], ground[j]) <= epsilon``."""
        if self._cover is None:
            G = self.ground
            rows = max(1, _BLOCK_CELLS // max(G.size, 1))
            parts = [self.weights.weight_block(G[lo:lo + rows], G) <= self.epsilon
                     for lo in range(0, G.size, rows)]
            self._cover = np.vstack(parts) if parts else np.zeros((0, 0), dtype=bool)
        return self._cover

    def local(self, ids) -> np.ndarray:
        ids = np.asarray(list(ids), dtype=np.int64)
        pos = np.searchsorted(self.ground, ids)
        ok = (pos < self.ground.size) & (self.ground[np.minimum(pos, self.ground.size - 1)] == ids)
        if not np.all(ok):
            raise InputError("element outside the sparsification ground set")
        return pos


def h_value(inst: SparsificationInstance, Vprime: Iterable[int]) -> int:
    """Direct evaluation through divergences; h(∅) = 0."""
    Vp = np.unique(np.asarray(list(Vprime), dtype=np.int64))
    if Vp.size == 0:
        return 0
    inst.local(Vp)
    rest = np.setdiff1d(inst.ground, Vp)
    if rest.size == 0:
        return 0
    return int(np.count_nonzero(inst.weights.divergence_all(Vp, rest) <= inst.epsilon))


class SparsificationObjective(Objective):
    """h as a (non-monotone) set function, evaluated through the coverage matrix."""

    kind = "sparsification"
    monotone = False

    def __init__(self, inst: SparsificationInstance):
        super().__init__(inst.weights.objective.n)
        self.inst = inst
        self.cover = inst.coverage()

    def _value(self, ids):
        if len(ids) == 0:
            return 0.0
        loc = self.inst.local(ids)
        covered = self.cover[loc].any(axis=0)
        covered[loc] = False
        return float(np.count_nonzero(covered))

    def singleton_values(self, ids=None):
        ids = self.inst.ground if ids is None else np.asarray(ids, dtype=np.int64)
        return np.array([self._value(np.array([v])) for v in ids.tolist()])

    def context(self, S=()):
        return CoverageContext(self, S)


class CoverageContext(GainContext):
    """Running cover counts for h; gains and losses in O(|ground|)."""

    def __init__(self, objective: SparsificationObjective, S=()):
        super().__init__(objective, S)
        inst = objective.inst
        n = inst.ground.size
        self.member = np.zeros(n, dtype=bool)
        self.count = np.zeros(n, dtype=np.int64)
        if self._members:
            loc = inst.local(sorted(self._members))
            self.member[loc] = True
            self.count = objective.cover[loc].sum(axis=0).astype(np.int64)

    def _gains(self, ids):
        return np.array([self._gain_one(v) for v in ids.tolist()], dtype=float)

    def _gain_one(self, v):
        self.n_gains += 1
        i = int(self.objective.inst.local([v])[0])
        row = self.objective.cover[i]
        fresh = row & (self.count == 0) & ~self.member
        fresh[i] = False
        return float(np.count_nonzero(fresh) - (1 if self.count[i] > 0 else 0))

    def gain(self, v):
        v = self._check_new(v)
        return self._gain_one(v)

    def _apply_add(self, v):
        i = int(self.objective.inst.local([v])[0])
        self.count += self.objective.cover[i]
        self.member[i] = True

    def loss(self, v):
        v = self._check_member(v)
        i = int(self.objective.inst.local([v])[0])
        row = self.objective.cover[i]
        lost = row & (self.count == 1) & ~self.member
        after_self = self.count[i] - int(row[i])
        return float((1 if after_self > 0 else 0) - np.count_nonzero(lost))

    def _apply_remove(self, v):
        i = int(self.objective.inst.local([v])[0])
        self.count -= self.objective.cover[i]
        self.member[i] = False


def exact_sparsifier_optimum(inst: SparsificationInstance) -> tuple[list[int], int]:
    """Exhaustive argmax of h; ties go to smaller |V'|, then lexicographic order."""
    G = inst.ground
    n = G.size
    if n > MAX_EXACT_SPARSIFIER:
        raise InputError(f"exact sparsifier refused for n = {n} > {MAX_EXACT_SPARSIFIER}")
    A = inst.coverage()
    rows = [sum(1 << j for j in np.flatnonzero(A[i]).tolist()) for i in range(n)]
    best_key, best = None, ()
    for size in range(n + 1):
        for combo in combinations(range(n), size):
            union = 0
            mask = 0
            for i in combo:
                union |= rows[i]
                mask |= 1 << i
            h = bin(union & ~mask).count("1")
            key = (-h, size)
            if best_key is None or key < best_key:
                best_key, best = key, combo
    Vstar = [int(G[i]) for i in best]
    return Vstar, len(Vstar)

