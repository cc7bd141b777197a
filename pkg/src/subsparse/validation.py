"""Seeded property suite behind ``subsparse validate``.

Every check draws small random instances, tests one invariant, and reports
the number of cases tried and the number of violations found.
"""

from __future__ import annotations

import itertools
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Corpus, Document, load_feature_matrix, save_feature_matrix, tfidf_featurize
from .evaluation import rouge2, rouge2_scores
from .graph import (GraphWeights, SparsificationInstance, SparsificationObjective,
                    exact_sparsifier_optimum, h_value)
from .maximizers import (SieveConfig, brute_force_max, double_greedy, greedy, lazy_greedy,
                         sieve_streaming)
from .objectives import TOL, FeatureMatrix, FeatureSqrtObjective
from .sparsifier import SparsifierConfig, pre_prune, removal_count, sparsify

E_FACTOR = 1.0 - 1.0 / math.e


@dataclass
class CheckResult:
    name: str
    cases: int
    violations: int
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.violations == 0


def random_feature_objective(rng: np.random.Generator, n: int, m: int | None = None,
                             density: float = 0.4) -> FeatureSqrtObjective:
    m = m or max(2, n // 2)
    dense = rng.random((n, m)) * (rng.random((n, m)) < density)
    return FeatureSqrtObjective(FeatureMatrix.from_dense(dense))


def _subsets(n):
    for size in range(n + 1):
        yield from itertools.combinations(range(n), size)


def check_submodular_monotone(rng, cases):
    bad = 0
    for _ in range(cases):
        f = random_feature_objective(rng, int(rng.integers(3, 9)))
        S = [v for v in range(f.n) if rng.random() < 0.3]
        T = sorted(set(S) | {v for v in range(f.n) if rng.random() < 0.3})
        for v in set(range(f.n)) - set(T):
            if f.gain(v, S) < f.gain(v, T) - TOL or f.gain(v, T) < -TOL:
                bad += 1
    return cases, bad


def check_context_matches_scratch(rng, cases):
    bad = 0
    for _ in range(cases):
        f = random_feature_objective(rng, 8)
        ctx = f.context()
        for v in rng.permutation(f.n).tolist():
            g = ctx.gain(v)
            if abs(g - (f.value(ctx.current_set | {v}) - f.value(ctx.current_set))) > TOL:
                bad += 1
            ctx.commit(v)
    return cases, bad


def check_greedy_bound(rng, cases):
    bad = 0
    for _ in range(cases):
        f = random_feature_objective(rng, int(rng.integers(4, 11)))
        k = int(rng.integers(1, 5))
        if greedy(f, None, k).value < E_FACTOR * brute_force_max(f, None, k).value - TOL:
            bad += 1
    return cases, bad


def check_lazy_equals_greedy(rng, cases):
    bad = 0
    for _ in range(cases):
        f = random_feature_objective(rng, int(rng.integers(10, 60)))
        k = int(rng.integers(1, 10))
        if greedy(f, None, k).selected != lazy_greedy(f, None, k).selected:
            bad += 1
    return cases, bad


def check_sieve_bound(rng, cases):
    bad = 0
    for _ in range(cases):
        f = random_feature_objective(rng, int(rng.integers(3, 11)))
        k = int(rng.integers(1, 4))
        cfg = SieveConfig()
        sol = sieve_streaming(f, rng.permutation(f.n).tolist(), k, cfg)
        if sol.value < 0.4 * brute_force_max(f, None, k).value - TOL:
            bad += 1
        if sol.extra["peak_retained"] > cfg.n_thresholds * k:
            bad += 1
    return cases, bad


def check_graph_inequalities(rng, cases):
    """Conditioning monotonicity, the marginal-gain bound and the triangle inequality."""
    bad = 0
    for _ in range(cases):
        f = random_feature_objective(rng, int(rng.integers(4, 10)))
        gw = GraphWeights(f)
        W = gw.weight_block(np.arange(f.n), np.arange(f.n))
        for v, u, x in itertools.product(range(f.n), repeat=3):
            # the middle node must differ from both ends: w(u, u) = -g[u] < 0
            if u != v and u != x and W[v, x] > W[v, u] + W[u, x] + TOL:
                bad += 1
        u, v = rng.choice(f.n, 2, replace=False).tolist()
        others = [x for x in range(f.n) if x not in (u, v)]
        S = [x for x in others if rng.random() < 0.5]
        P = [x for x in S if rng.random() < 0.5]
        wS = gw.conditional_edge_weight(u, v, S)
        if wS > gw.conditional_edge_weight(u, v, P) + TOL:
            bad += 1
        if f.gain(v, S) > f.gain(u, S) + wS + TOL:
            bad += 1
    return cases, bad


def check_h_submodular(rng, cases):
    bad = 0
    for _ in range(cases):
        f = random_feature_objective(rng, int(rng.integers(3, 7)))
        gw = GraphWeights(f)
        eps = float(rng.uniform(-0.5, 1.5))
        h = SparsificationObjective(SparsificationInstance(gw, eps))
        vals = {S: h.value(S) for S in _subsets(f.n)}
        for S, val in vals.items():
            for v in set(range(f.n)) - set(S):
                for w in set(range(f.n)) - set(S) - {v}:
                    Sv = tuple(sorted(S + (v,)))
                    Sw = tuple(sorted(S + (w,)))
                    Svw = tuple(sorted(S + (v, w)))
                    if vals[Sv] + vals[Sw] < vals[Svw] + val - TOL:
                        bad += 1
        if vals[tuple(range(f.n))] != 0 or h_value(h.inst, range(f.n)) != 0:
            bad += 1
    return cases, bad


def check_double_greedy(rng, cases):
    bad = 0
    for _ in range(cases):
        f = random_feature_objective(rng, int(rng.integers(3, 8)))
        inst = SparsificationInstance(GraphWeights(f), float(rng.uniform(0, 1)))
        h = SparsificationObjective(inst)
        Vstar, _ = exact_sparsifier_optimum(inst)
        opt = h.value(Vstar)
        if opt != max(h.value(S) for S in _subsets(f.n)):
            bad += 1
        if h.value(double_greedy(h, None)) < opt / 3 - TOL:
            bad += 1
    return cases, bad


def check_sparsify_trace(rng, cases):
    bad = 0
    for _ in range(cases):
        n = int(rng.integers(200, 600))
        f = random_feature_objective(rng, n, 40, density=0.1)
        cfg = SparsifierConfig(r=2.0, c=8.0, seed=int(rng.integers(1 << 31)))
        Vp, trace = sparsify(f, None, cfg)
        s_full = math.ceil(cfg.r * math.log2(n))
        size = n
        for rec in trace.iterations:
            s = min(size, s_full)
            kept = size - s - removal_count(size - s, cfg.c)
            if (rec["size_before"], rec["sample_size"], rec["kept_size"]) != (size, s, kept):
                bad += 1
            if (rec["max_removed_divergence"] is not None and rec["min_kept_divergence"] is not None
                    and rec["max_removed_divergence"] > rec["min_kept_divergence"]):
                bad += 1
            size = kept
        bound = math.ceil(math.log2(n) / math.log2(math.sqrt(cfg.c))) + 1
        if len(trace.iterations) > bound:
            bad += 1
        if sparsify(f, None, cfg)[0] != Vp:
            bad += 1
    return cases, bad


def check_pre_prune_safe(rng, cases):
    bad = 0
    for _ in range(cases):
        f = random_feature_objective(rng, int(rng.integers(3, 13)))
        k = int(rng.integers(1, f.n + 1))
        if greedy(f, pre_prune(f, range(f.n), k), k).value != greedy(f, None, k).value:
            bad += 1
    return cases, bad


def check_data_roundtrip(rng, cases):
    bad = 0
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "m.txt"
        for _ in range(cases):
            fm = random_feature_objective(rng, int(rng.integers(1, 20))).matrix
            save_feature_matrix(fm, path)
            if load_feature_matrix(path) != fm:
                bad += 1
    corpus = Corpus([Document("d", [["a", "b", "a"], ["b", "c"]])])
    if tfidf_featurize(corpus).csr.data.min() <= 0:
        bad += 1
    return cases + 1, bad


def check_rouge(rng, cases):
    bad = 0
    if rouge2(list("abc"), list("abd")) != (0.5, 0.5) or rouge2(list("ab"), list("cd")) != (0, 0):
        bad += 1
    for _ in range(cases):
        cand = rng.choice(list("abcd"), int(rng.integers(0, 8))).tolist()
        ref = rng.choice(list("abcd"), int(rng.integers(0, 8))).tolist()
        r, p, f1 = rouge2_scores(cand, ref)
        if not 0 <= r <= 1 or f1 > 2 * min(r, p) + TOL:
            bad += 1
        if abs(f1 - rouge2_scores(ref, cand)[2]) > TOL:
            bad += 1
    return cases + 1, bad


SUITES = [
    ("objective submodularity and monotonicity", check_submodular_monotone, 200, 30),
    ("incremental gains match scratch", check_context_matches_scratch, 50, 10),
    ("greedy (1-1/e) bound", check_greedy_bound, 200, 30),
    ("lazy greedy equals greedy", check_lazy_equals_greedy, 100, 15),
    ("sieve streaming bound and memory", check_sieve_bound, 200, 30),
    ("graph weight inequalities", check_graph_inequalities, 20, 5),
    ("h submodular, h(V) = 0", check_h_submodular, 50, 8),
    ("double greedy 1/3 bound", check_double_greedy, 50, 10),
    ("sparsify trace recursion", check_sparsify_trace, 10, 2),
    ("pre-prune keeps greedy value", check_pre_prune_safe, 200, 30),
    ("matrix round trip, tf-idf positivity", check_data_roundtrip, 20, 5),
    ("rouge-2 examples and bounds", check_rouge, 500, 50),
]


def run_validation(seed: int = 0, quick: bool = False) -> list[CheckResult]:
    results = []
    for i, (name, fn, full, small) in enumerate(SUITES):
        rng = np.random.default_rng([seed, i])
        try:
            cases, bad = fn(rng, small if quick else full)
            results.append(CheckResult(name, cases, bad))
        except Exception as exc:  # report and keep going
            results.append(CheckResult(name, 0, 1, f"{type(exc).__name__}: {exc}"))
    return results


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check'.ljust(width)}  cases  violations  status"]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        line = f"{r.name.ljust(width)}  {r.cases:5d}  {r.violations:10d}  {status}"
        if r.detail:
            line += f"  ({r.detail})"
        lines.append(line)
    return "\n".join(lines)
