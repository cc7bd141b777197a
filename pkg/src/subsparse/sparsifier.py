"""Submodular sparsification: randomized multi-round ground-set pruning.

Each round samples ceil(r log2 n) probes U from the current set, moves them
into the output, and drops the floor((1 - 1/sqrt(c)) |V|) remaining
elements with the smallest divergence from U.  ``n`` is frozen at the
input size.  Optional extras: pre-pruning by global gains, importance
sampling of probes, and a double-greedy post-reduction of the output.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InputError
from .graph import GraphWeights, GlobalGains, SparsificationInstance, SparsificationObjective
from .maximizers import double_greedy
from .objectives import Objective

POST_REDUCE_LIMIT = 5000


@dataclass(frozen=True)
class SparsifierConfig:
    r: float = 8.0
    c: float = 8.0
    seed: int = 0
    sampling: str = "uniform"
    pre_prune: bool = False
    post_reduce: float | None = None

    def __post_init__(self):
        if not self.r > 0:
            raise InputError("r must be positive")
        if not self.c > 1:
            raise InputError("c must exceed 1")
        if self.sampling not in ("uniform", "importance"):
            raise InputError(f"unknown sampling mode {self.sampling!r}")

    @property
    def removal_fraction(self) -> float:
        return 1.0 - 1.0 / math.sqrt(self.c)


@dataclass
class PruneTrace:
    config: dict
    n: int = 0
    iterations: list = field(default_factory=list)
    final_Vprime: list = field(default_factory=list)
    total_weight_evals: int = 0
    pre_pruned_size: int | None = None
    post_reduced_size: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def removal_count(size: int, c: float) -> int:
    return math.floor((1.0 - 1.0 / math.sqrt(c)) * size)


def sample_size(n: int, r: float) -> int:
    return math.ceil(r * math.log2(n))


def _rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def uniform_sample(V, s: int, seed) -> list[int]:
    """Partial Fisher-Yates: ``s`` distinct draws in draw order."""
    V = np.asarray(V, dtype=np.int64)
    if not 0 <= s <= V.size:
        raise InputError("sample size exceeds the population")
    rng = _rng(seed)
    pool = V.copy()
    for i in range(s):
        j = int(rng.integers(i, pool.size))
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:s].tolist()


def importance_sample(V, globals_: GlobalGains, objective: Objective, s: int, seed) -> list[int]:
    """Draw ``s`` distinct elements with probability proportional to f(u) + f(u|V-u).

    Sequential weighted draws without replacement.  Scores are floored at a
    tiny fraction of the best so that no element is impossible; when every
    score is <= 0 the draw is uniform.
    """
    V = np.asarray(V, dtype=np.int64)
    if not 0 <= s <= V.size:
        raise InputError("sample size exceeds the population")
    rng = _rng(seed)
    scores = objective.singleton_values(V) + globals_[V]
    top = scores.max() if V.size else 0.0
    if not top > 0:
        return uniform_sample(V, s, rng)
    w = np.maximum(scores, top * 1e-9)
    out = []
    for _ in range(s):
        cum = np.cumsum(w)
        i = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        i = min(i, V.size - 1)
        while w[i] == 0:  # guard against landing on an exhausted slot at the top edge
            i -= 1
        out.append(int(V[i]))
        w[i] = 0.0
    return out


def pre_prune(objective: Objective, V, k: int) -> list[int]:
    """Drop every u with f(u) below the k-th largest f(v | V - v).

    Such u can never be a greedy pick within the first k steps, so greedy
    output is unchanged.
    """
    ids = objective._ids(range(objective.n) if V is None else V)
    if k < 1:
        raise InputError("pre-pruning needs k >= 1")
    if k > ids.size:
        return ids.tolist()
    g = objective.global_gains(ids)
    tau = np.sort(g)[-k]
    keep = objective.singleton_values(ids) >= tau
    return ids[keep].tolist()


def post_reduce(objective: Objective, Vprime, epsilon: float,
                weights: GraphWeights | None = None, seed=0) -> list[int]:
    """Shrink V' further by randomized double greedy on h restricted to V'.

    Returns the selected set plus every element it leaves uncovered, so each
    dropped v has divergence <= epsilon from the result.
    """
    Vp = objective._ids(Vprime)
    if Vp.size > POST_REDUCE_LIMIT:
        raise InputError(f"post-reduction needs O(|V'|^2) weights; |V'| = {Vp.size} exceeds "
                         f"{POST_REDUCE_LIMIT}. Sparsify with a smaller r first.")
    if Vp.size == 0:
        return []
    if weights is None:
        weights = GraphWeights(objective, Vp)
    inst = SparsificationInstance(weights, float(epsilon), ground=Vp)
    hobj = SparsificationObjective(inst)
    X = double_greedy(hobj, Vp, mode="randomized", seed=seed)
    if not X:
        return Vp.tolist()
    covered = hobj.cover[inst.local(X)].any(axis=0)
    keep = ~covered
    keep[inst.local(X)] = True
    return Vp[keep].tolist()


def sparsify(objective: Objective, V=None, cfg: SparsifierConfig | None = None,
             k: int | None = None) -> tuple[list[int], PruneTrace]:
    """Run the pruning rounds; returns the reduced set V' and its trace."""
    cfg = cfg or SparsifierConfig()
    ids = objective._ids(range(objective.n) if V is None else V)
    if ids.size == 0:
        raise InputError("cannot sparsify an empty ground set")
    trace = PruneTrace(config=asdict(cfg))
    if cfg.pre_prune:
        if k is None:
            raise InputError("pre-pruning needs the budget k")
        ids = np.asarray(pre_prune(objective, ids, k), dtype=np.int64)
        trace.pre_pruned_size = int(ids.size)
    n = int(ids.size)
    trace.n = n
    threshold = cfg.r * math.log2(n) if n > 1 else math.inf
    if threshold >= n:
        trace.final_Vprime = ids.tolist()
        return trace.final_Vprime, trace

    weights = GraphWeights(objective, ids)
    rng = np.random.default_rng(cfg.seed)
    s_full = sample_size(n, cfg.r)
    current = ids
    kept_probes: list[int] = []
    while current.size > threshold:
        s = min(current.size, s_full)
        if cfg.sampling == "uniform":
            U = uniform_sample(current, s, rng)
        else:
            U = importance_sample(current, weights.globals, objective, s, rng)
        kept_probes.extend(U)
        rest = np.setdiff1d(current, U)
        record = {"size_before": int(current.size), "sample_size": s, "sampled": U,
                  "removed_count": 0, "kept_size": int(rest.size),
                  "max_removed_divergence": None, "min_kept_divergence": None}
        if rest.size:
            div = weights.divergence_all(U, rest)
            trace.total_weight_evals += len(U) * int(rest.size)
            m = removal_count(rest.size, cfg.c)
            order = np.lexsort((rest, div))  # smallest divergence first, then smaller id
            removed, kept = order[:m], order[m:]
            record["removed_count"] = int(m)
            record["kept_size"] = int(kept.size)
            if m:
                record["max_removed_divergence"] = float(div[removed].max())
            if kept.size:
                record["min_kept_divergence"] = float(div[kept].min())
            rest = np.sort(rest[kept])
        trace.iterations.append(record)
        current = rest
    Vprime = sorted(set(kept_probes) | set(current.tolist()))
    if cfg.post_reduce is not None:
        Vprime = post_reduce(objective, Vprime, cfg.post_reduce, weights=weights,
                             seed=cfg.seed)
        trace.post_reduced_size = len(Vprime)
    trace.final_Vprime = Vprime
    return Vprime, trace
