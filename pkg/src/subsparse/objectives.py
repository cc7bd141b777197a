"""Submodular objectives with incremental marginal-gain state.

Three families are provided:

* ``feature_sqrt``: f(S) = sum_u sqrt(c_u(S)), with c_u(S) = sum_{v in S} w[v, u]
  over a sparse nonnegative element x feature matrix.
* ``facility_location``: f(S) = sum_i max_{j in S} sim[i, j].
* ``explicit_table``: a value per subset, for hand-built test functions.

Every objective is immutable once built.  Mutable per-run state lives in a
:class:`GainContext` opened from the objective.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InputError, SubmodularityError

TOL = 1e-9
MAX_EXPLICIT_ELEMENTS = 20


def _segment_sums(values: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    # sequential per-row sums (csr matvec); a row's result never depends on other rows
    n_rows = len(indptr) - 1
    m = sp.csr_matrix((values, np.zeros(len(values), dtype=np.int32), indptr),
                      shape=(n_rows, 1))
    return np.asarray(m @ np.ones(1)).ravel()


@dataclass(frozen=True)
class FeatureMatrix:
    """Sparse nonnegative element x feature affinities, stored as CSR."""

    csr: sp.csr_matrix

    def __post_init__(self):
        m = self.csr
        if not sp.isspmatrix_csr(m):
            raise InputError("FeatureMatrix needs a CSR matrix")
        if m.nnz and m.data.min() < 0:
            raise InputError("negative feature weight")
        if not m.has_canonical_format:
            raise InputError("duplicate (element, feature) entries")

    @classmethod
    def from_triples(cls, n_elements: int, n_features: int, rows, cols, weights) -> "FeatureMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.float64)
        if not (len(rows) == len(cols) == len(weights)):
            raise InputError("triple arrays differ in length")
        if n_elements < 0 or n_features < 0:
            raise InputError("negative matrix dimensions")
        if len(rows):
            if rows.min() < 0 or rows.max() >= n_elements:
                raise InputError("element id out of range")
            if cols.min() < 0 or cols.max() >= n_features:
                raise InputError("feature id out of range")
            if weights.min() < 0 or not np.all(np.isfinite(weights)):
                raise InputError("feature weights must be finite and nonnegative")
            keys = rows * max(n_features, 1) + cols
            if len(np.unique(keys)) != len(keys):
                raise InputError("duplicate (element, feature) entries")
        coo = sp.coo_matrix((weights, (rows, cols)), shape=(n_elements, n_features))
        csr = coo.tocsr()
        csr.sort_indices()
        return cls(csr)

    @classmethod
    def from_dense(cls, dense) -> "FeatureMatrix":
        dense = np.atleast_2d(np.asarray(dense, dtype=np.float64))
        r, c = np.nonzero(dense)
        return cls.from_triples(dense.shape[0], dense.shape[1], r, c, dense[r, c])

    @property
    def n_elements(self) -> int:
        return self.csr.shape[0]

    @property
    def n_features(self) -> int:
        return self.csr.shape[1]

    def entries(self):
        """Yield ``(element_id, feature_id, weight)`` in row-major order."""
        coo = self.csr.tocoo()
        for r, c, w in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()):
            yield r, c, w

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        a, b = self.csr, other.csr
        return (a.shape == b.shape and a.nnz == b.nnz
                and np.array_equal(a.indptr, b.indptr)
                and np.array_equal(a.indices, b.indices)
                and np.array_equal(a.data, b.data))

    __hash__ = None


@dataclass(frozen=True)
class SimilarityMatrix:
    sim: np.ndarray

    def __post_init__(self):
        s = self.sim
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise InputError("similarity matrix must be square")
        if not np.all(np.isfinite(s)) or (s.size and s.min() < 0):
            raise InputError("similarities must be finite and nonnegative")
        if s.size and np.any(np.diag(s) < s.max(axis=1)):
            i = int(np.argmax(s.max(axis=1) - np.diag(s)))
            raise InputError(f"row {i}: self-similarity is not maximal")

    @classmethod
    def from_array(cls, a) -> "SimilarityMatrix":
        return cls(np.array(a, dtype=np.float64))

    @property
    def n_elements(self) -> int:
        return self.sim.shape[0]


class Objective:
    """Base class for a normalized set function over ids ``0..n-1``."""

    kind = "abstract"
    monotone = True

    def __init__(self, n: int):
        self.n = int(n)

    # -- validation -------------------------------------------------------
    def _ids(self, S) -> np.ndarray:
        if isinstance(S, np.ndarray):
            ids = np.unique(S.astype(np.int64, copy=False))
        elif isinstance(S, range):
            ids = np.arange(S.start, S.stop, S.step, dtype=np.int64)
            ids = np.unique(ids) if S.step < 0 else ids
        else:
            ids = np.unique(np.fromiter((int(x) for x in S), dtype=np.int64))
        if ids.size and (ids[0] < 0 or ids[-1] >= self.n):
            raise InputError(f"element id out of range for ground set of size {self.n}")
        return ids

    def _check_id(self, v) -> int:
        v = int(v)
        if not 0 <= v < self.n:
            raise InputError(f"element id {v} out of range")
        return v

    # -- evaluation -------------------------------------------------------
    def value(self, S: Iterable[int]) -> float:
        ids = self._ids(S)
        if ids.size == 0:
            return 0.0
        return self._value(ids)

    def _value(self, ids: np.ndarray) -> float:
        raise NotImplementedError

    def gain(self, v: int, S: Iterable[int]) -> float:
        """f(S + v) - f(S), by two scratch evaluations."""
        v = self._check_id(v)
        ids = self._ids(S)
        if np.any(ids == v):
            raise InputError(f"element {v} already in the conditioning set")
        return self._value(np.append(ids, v)) - (self._value(ids) if ids.size else 0.0)

    def context(self, S: Iterable[int] = ()) -> "GainContext":
        return GainContext(self, S)

    def singleton_values(self, ids=None) -> np.ndarray:
        ids = np.arange(self.n) if ids is None else np.asarray(ids, dtype=np.int64)
        return np.array([self._value(np.array([v])) for v in ids.tolist()])

    def global_gains(self, V) -> np.ndarray:
        """f(u | V - u) for each u in V (same order as sorted V)."""
        ids = self._ids(V)
        full = self._value(ids)
        out = np.empty(len(ids))
        for i in range(len(ids)):
            rest = np.delete(ids, i)
            out[i] = full - (self._value(rest) if rest.size else 0.0)
        return out

    def pairwise_gains(self, U, V) -> np.ndarray:
        """Matrix ``P[i, j] = f(V[j] | {U[i]})``; zero where ``U[i] == V[j]``."""
        U = np.asarray(U, dtype=np.int64)
        V = np.asarray(V, dtype=np.int64)
        out = np.zeros((len(U), len(V)))
        for i, u in enumerate(U.tolist()):
            fu = self._value(np.array([u]))
            for j, v in enumerate(V.tolist()):
                if u != v:
                    out[i, j] = self._value(np.array([u, v])) - fu
        return out


class GainContext:
    """Incremental state for marginal gains against a growing (or shrinking) set.

    The base implementation re-evaluates from scratch; subclasses keep
    running accumulators.
    """

    def __init__(self, objective: Objective, S: Iterable[int] = ()):
        self.objective = objective
        ids = objective._ids(S)
        self._members = set(ids.tolist())
        self.value = objective._value(ids) if ids.size else 0.0
        self.n_gains = 0

    @property
    def current_set(self) -> frozenset:
        return frozenset(self._members)

    def __contains__(self, v) -> bool:
        return int(v) in self._members

    def _check_new(self, v) -> int:
        v = self.objective._check_id(v)
        if v in self._members:
            raise InputError(f"element {v} already in the current set")
        return v

    def _check_member(self, v) -> int:
        v = self.objective._check_id(v)
        if v not in self._members:
            raise InputError(f"element {v} not in the current set")
        return v

    def gain(self, v: int) -> float:
        v = self._check_new(v)
        return float(self._gains(np.array([v], dtype=np.int64))[0])

    def gains(self, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        for v in ids.tolist():
            self._check_new(v)
        return self._gains(ids)

    def _gains(self, ids: np.ndarray) -> np.ndarray:
        self.n_gains += len(ids)
        base = np.fromiter(self._members, dtype=np.int64, count=len(self._members))
        return np.array([self.objective._value(np.append(base, v)) - self.value
                         for v in ids.tolist()])

    def commit(self, v: int) -> float:
        """Add ``v``; returns the realized gain."""
        g = self.gain(v)
        self._apply_add(v)
        self._members.add(int(v))
        self.value += g
        return g

    def _apply_add(self, v: int) -> None:
        pass

    def loss(self, v: int) -> float:
        """f(S - v) - f(S) for a member ``v``."""
        v = self._check_member(v)
        rest = np.fromiter((x for x in self._members if x != v), dtype=np.int64)
        return (self.objective._value(rest) if rest.size else 0.0) - self.value

    def remove(self, v: int) -> float:
        d = self.loss(v)
        self._apply_remove(v)
        self._members.discard(int(v))
        self.value += d
        return d

    def _apply_remove(self, v: int) -> None:
        pass


# ---------------------------------------------------------------------------
# feature-based square-root coverage


class FeatureSqrtObjective(Objective):
    kind = "feature_sqrt"

    def __init__(self, matrix: FeatureMatrix):
        super().__init__(matrix.n_elements)
        self.matrix = matrix
        self._X = matrix.csr
        self._singletons = _segment_sums(np.sqrt(self._X.data), self._X.indptr)

    def _value(self, ids):
        c = np.asarray(self._X[ids].sum(axis=0)).ravel()
        return float(np.sqrt(c).sum())

    def singleton_values(self, ids=None):
        if ids is None:
            return self._singletons.copy()
        return self._singletons[np.asarray(ids, dtype=np.int64)]

    def column_sums(self, ids=None) -> np.ndarray:
        X = self._X if ids is None else self._X[np.asarray(ids, dtype=np.int64)]
        return np.asarray(X.sum(axis=0)).ravel()

    def global_gains(self, V):
        ids = self._ids(V)
        sub = self._X[ids]
        c = np.asarray(sub.sum(axis=0)).ravel()
        cf = c[sub.indices]
        vals = np.sqrt(cf) - np.sqrt(np.maximum(cf - sub.data, 0.0))
        return _segment_sums(vals, sub.indptr)

    def pairwise_gains(self, U, V):
        U = np.asarray(U, dtype=np.int64)
        V = np.asarray(V, dtype=np.int64)
        nu, nv = len(U), len(V)
        if nu == 0 or nv == 0:
            return np.zeros((nu, nv))
        XU = self._X[U]
        XV = self._X[V].tocsc()
        u_rows = np.repeat(np.arange(nu), np.diff(XU.indptr))
        feats = XU.indices
        starts = XV.indptr[feats]
        counts = XV.indptr[feats + 1] - starts
        total = int(counts.sum())
        if total:
            rep = np.repeat(np.arange(len(feats)), counts)
            offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
            pos = starts[rep] + offsets
            a = XU.data[rep]
            b = XV.data[pos]
            # f(v|u) = f(v) + sum over shared features of sqrt(a+b) - sqrt(a) - sqrt(b)
            corr = np.sqrt(a + b) - np.sqrt(a) - np.sqrt(b)
            flat = u_rows[rep] * nv + XV.indices[pos]
            block = np.bincount(flat, weights=corr, minlength=nu * nv).reshape(nu, nv)
            block += self._singletons[V]
        else:
            block = np.broadcast_to(self._singletons[V], (nu, nv)).copy()
        if np.intersect1d(U, V).size:
            block[U[:, None] == V[None, :]] = 0.0
        return block

    def context(self, S=()):
        return FeatureSqrtContext(self, S)


class FeatureSqrtContext(GainContext):
    """Keeps the per-feature running sums c_u(S)."""

    def __init__(self, objective: FeatureSqrtObjective, S=()):
        self.objective = objective
        ids = objective._ids(S)
        self._members = set(ids.tolist())
        self.sums = objective.column_sums(ids) if ids.size else np.zeros(objective.matrix.n_features)
        self.value = float(np.sqrt(self.sums).sum()) if ids.size else 0.0
        self.n_gains = 0

    def _row(self, v):
        X = self.objective._X
        lo, hi = X.indptr[v], X.indptr[v + 1]
        return X.indices[lo:hi], X.data[lo:hi]

    def gain(self, v):
        v = self._check_new(v)
        self.n_gains += 1
        idx, w = self._row(v)
        c = self.sums[idx]
        # plain left-to-right sum matches _segment_sums bit for bit
        return float(sum((np.sqrt(c + w) - np.sqrt(c)).tolist()))

    def _gains(self, ids):
        self.n_gains += len(ids)
        sub = self.objective._X[ids]
        c = self.sums[sub.indices]
        return _segment_sums(np.sqrt(c + sub.data) - np.sqrt(c), sub.indptr)

    def commit(self, v):
        g = self.gain(v)
        idx, w = self._row(int(v))
        self.sums[idx] += w
        self._members.add(int(v))
        self.value += g
        return g

    def loss(self, v):
        v = self._check_member(v)
        idx, w = self._row(v)
        c = self.sums[idx]
        return float(sum((np.sqrt(np.maximum(c - w, 0.0)) - np.sqrt(c)).tolist()))

    def _apply_remove(self, v):
        idx, w = self._row(int(v))
        self.sums[idx] = np.maximum(self.sums[idx] - w, 0.0)


# ---------------------------------------------------------------------------
# facility location


class FacilityLocationObjective(Objective):
    kind = "facility_location"

    def __init__(self, similarity: SimilarityMatrix):
        super().__init__(similarity.n_elements)
        self.similarity = similarity
        # row v of _simT is column v of sim
        self._simT = np.ascontiguousarray(similarity.sim.T)

    def _value(self, ids):
        return float(self._simT[ids].max(axis=0).sum())

    def singleton_values(self, ids=None):
        ids = np.arange(self.n) if ids is None else np.asarray(ids, dtype=np.int64)
        return self._simT[ids].sum(axis=1)

    def global_gains(self, V):
        ids = self._ids(V)
        cols = self._simT[ids]  # |V| x n
        if len(ids) == 1:
            return cols.sum(axis=1)
        top2 = np.partition(cols, len(ids) - 2, axis=0)[-2:]
        best, second = top2[1], top2[0]
        owner = np.argmax(cols, axis=0)
        return np.bincount(owner, weights=best - second, minlength=len(ids))

    def pairwise_gains(self, U, V):
        U = np.asarray(U, dtype=np.int64)
        V = np.asarray(V, dtype=np.int64)
        out = np.empty((len(U), len(V)))
        cols_v = self._simT[V]
        for i, u in enumerate(U.tolist()):
            out[i] = np.maximum(cols_v - self._simT[u], 0.0).sum(axis=1)
        return out

    def context(self, S=()):
        return FacilityLocationContext(self, S)


class FacilityLocationContext(GainContext):
    """Keeps the per-element current max similarity to the selected set."""

    def __init__(self, objective: FacilityLocationObjective, S=()):
        super().__init__(objective, S)
        ids = np.fromiter(self._members, dtype=np.int64, count=len(self._members))
        self.curmax = (objective._simT[ids].max(axis=0) if ids.size
                       else np.zeros(objective.n))

    def gain(self, v):
        v = self._check_new(v)
        return float(self._gains(np.array([v], dtype=np.int64))[0])

    def _gains(self, ids):
        self.n_gains += len(ids)
        return np.maximum(self.objective._simT[ids] - self.curmax, 0.0).sum(axis=1)

    def _apply_add(self, v):
        np.maximum(self.curmax, self.objective._simT[int(v)], out=self.curmax)

    def _apply_remove(self, v):
        rest = np.fromiter((x for x in self._members if x != int(v)), dtype=np.int64)
        self.curmax = (self.objective._simT[rest].max(axis=0) if rest.size
                       else np.zeros(self.objective.n))


# ---------------------------------------------------------------------------
# explicit value tables


class ExplicitObjective(Objective):
    """Set function given by a table of 2**n values indexed by bitmask."""

    kind = "explicit_table"

    def __init__(self, table: np.ndarray, n: int, monotone: bool):
        super().__init__(n)
        self.table = table
        self.monotone = monotone
        self._bits = 1 << np.arange(n, dtype=np.int64)

    def mask(self, ids) -> int:
        return int(self._bits[np.asarray(ids, dtype=np.int64)].sum()) if len(ids) else 0

    def _value(self, ids):
        return float(self.table[self.mask(ids)])

    def singleton_values(self, ids=None):
        ids = np.arange(self.n) if ids is None else np.asarray(ids, dtype=np.int64)
        return self.table[self._bits[ids]].astype(float)


def _table_from_mapping(value_table, n):
    if isinstance(value_table, Mapping):
        keys = [frozenset(int(x) for x in k) for k in value_table]
        if n is None:
            n = max((max(k) + 1 for k in keys if k), default=0)
        if n > MAX_EXPLICIT_ELEMENTS:
            raise InputError(f"explicit tables are limited to {MAX_EXPLICIT_ELEMENTS} elements")
        table = np.full(1 << n, np.nan)
        for k, val in zip(keys, value_table.values()):
            if any(x < 0 or x >= n for x in k):
                raise InputError("table key has an out-of-range element")
            table[sum(1 << x for x in k)] = float(val)
        if np.isnan(table).any():
            missing = int(np.flatnonzero(np.isnan(table))[0])
            raise InputError(f"table does not cover subset {sorted(_bits_of(missing))}")
        return table, n
    table = np.asarray(value_table, dtype=np.float64)
    size = table.shape[0]
    n_inferred = size.bit_length() - 1
    if size != 1 << n_inferred or (n is not None and n != n_inferred):
        raise InputError("bitmask table length must be 2**n")
    if n_inferred > MAX_EXPLICIT_ELEMENTS:
        raise InputError(f"explicit tables are limited to {MAX_EXPLICIT_ELEMENTS} elements")
    return table.copy(), n_inferred


def _bits_of(mask: int):
    return [i for i in range(mask.bit_length()) if mask >> i & 1]


def find_submodularity_violation(table: np.ndarray, n: int, tol: float = TOL):
    """Return a violating ``(A, B, v)`` triple or ``None``.

    Uses the local form f(S+v) + f(S+w) >= f(S+v+w) + f(S), which is
    equivalent to diminishing returns over all A ⊆ B.
    """
    masks = np.arange(1 << n, dtype=np.int64)
    for v, w in itertools.combinations(range(n), 2):
        bv, bw = 1 << v, 1 << w
        base = masks[(masks & (bv | bw)) == 0]
        slack = table[base | bv] + table[base | bw] - table[base | bv | bw] - table[base]
        bad = np.flatnonzero(slack < -tol)
        if bad.size:
            m = int(base[bad[0]])
            A = frozenset(_bits_of(m))
            return A, A | {w}, v
    return None


def make_explicit_objective(value_table, n: int | None = None, *,
                            require_nonnegative: bool = True) -> ExplicitObjective:
    """Build an objective from a full value table.

    ``value_table`` is either a mapping from subsets (any iterable of ids) to
    values or a sequence of 2**n values indexed by bitmask.  The table must
    satisfy f(∅) = 0 and be submodular; violations raise
    :class:`SubmodularityError` carrying an ``(A, B, v)`` witness.
    """
    table, n = _table_from_mapping(value_table, n)
    if not np.all(np.isfinite(table)):
        raise InputError("table values must be finite")
    if table[0] != 0.0:
        raise InputError("table must be normalized: f(∅) = 0")
    if require_nonnegative and table.min() < -TOL:
        m = int(np.argmin(table))
        raise InputError(f"negative value {table[m]} at subset {_bits_of(m)}")
    witness = find_submodularity_violation(table, n)
    if witness is not None:
        A, B, v = witness
        raise SubmodularityError(
            f"diminishing returns violated: f({v}|{sorted(A)}) < f({v}|{sorted(B)})", witness)
    masks = np.arange(1 << n, dtype=np.int64)
    monotone = all(
        np.all(table[masks[(masks >> v & 1) == 0] | (1 << v)]
               >= table[masks[(masks >> v & 1) == 0]] - TOL)
        for v in range(n))
    return ExplicitObjective(table, n, monotone)


def modular_table(values: Sequence[float]) -> np.ndarray:
    """Bitmask table of the modular function f(S) = sum of values[v]."""
    n = len(values)
    vals = np.asarray(values, dtype=np.float64)
    masks = np.arange(1 << n, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n)) & 1
    return bits @ vals


def coverage_table(covers: Sequence[Iterable[int]], weights: Sequence[float] | None = None) -> np.ndarray:
    """Bitmask table of a weighted coverage function."""
    n = len(covers)
    universe = sorted(set().union(*map(set, covers))) if n else []
    pos = {x: i for i, x in enumerate(universe)}
    w = np.ones(len(universe)) if weights is None else np.asarray(weights, dtype=np.float64)
    inc = np.zeros((n, len(universe)), dtype=bool)
    for v, items in enumerate(covers):
        for x in items:
            inc[v, pos[x]] = True
    table = np.empty(1 << n)
    for m in range(1 << n):
        sel = [v for v in range(n) if m >> v & 1]
        table[m] = float(w[inc[sel].any(axis=0)].sum()) if sel else 0.0
    return table


# ---------------------------------------------------------------------------
# functional surface


def evaluate(objective: Objective, S: Iterable[int]) -> float:
    return objective.value(S)


def marginal_gain(objective: Objective, v: int, S: Iterable[int]) -> float:
    return objective.gain(v, S)


def open_gain_context(objective: Objective, S: Iterable[int] = ()) -> GainContext:
    return objective.context(S)


def ctx_gain(ctx: GainContext, v: int) -> float:
    return ctx.gain(v)


def ctx_commit(ctx: GainContext, v: int) -> GainContext:
    ctx.commit(v)
    return ctx
