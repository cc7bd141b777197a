"""Acceptance suite: one PASS/FAIL line per criterion.

Bounds are checked against the independent evaluators in ``oracles``;
the package only supplies the algorithm under test.
"""

import itertools
import json
import math
import statistics
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subsparse import (FeatureSqrtObjective, GraphWeights, SparsificationInstance,
                       SparsifierConfig, double_greedy,
                       exact_sparsifier_optimum, greedy, lazy_greedy, make_explicit_objective,
                       pre_prune, rouge2, set_threads, sieve_streaming, sparsify)
from subsparse.cli import main
from subsparse.data import SynthConfig, generate_synthetic, save_feature_matrix
from subsparse.evaluation import rouge2_scores
from subsparse.graph import SparsificationObjective, conditional_edge_weight
from subsparse.maximizers import SieveConfig
from subsparse.objectives import coverage_table

import oracles

TOL = 1e-9
GREEDY_RATIO = 1 - 1 / math.e


def synth(n, seed):
    return FeatureSqrtObjective(generate_synthetic(SynthConfig(n_elements=n, seed=seed)))


def cover_masks(W, eps):
    n = len(W)
    return [sum(1 << v for v in range(n) if W[u][v] <= eps) for u in range(n)]


def h_mask(masks, S):
    """h via bitmasks: elements outside S reached by some member of S."""
    union = 0
    inside = 0
    for u in S:
        union |= masks[u]
        inside |= 1 << u
    return bin(union & ~inside).count("1") if S else 0


def oracle_vstar(W, eps):
    """argmax h, ties to smaller size then lexicographic order."""
    masks = cover_masks(W, eps)
    best, best_val = (), 0
    for S in oracles.subsets(range(len(W))):
        val = h_mask(masks, S)
        if val > best_val:
            best, best_val = S, val
    return list(best), best_val


def eps_grid(W, lo=-math.inf):
    """Five thresholds spread over the weight quantiles, each in the middle of a
    gap between sorted weights so rounding cannot flip a comparison."""
    n = len(W)
    w = np.unique([W[u][v] for u in range(n) for v in range(n) if u != v])
    mids = (w[:-1] + w[1:]) / 2
    mids = mids[(np.diff(w) > 1e-6) & (mids >= lo)]
    return [float(mids[int(q * (mids.size - 1))]) for q in (0, 0.25, 0.5, 0.75, 1.0)]


def test_greedy_guarantee(criterion):
    t0 = time.perf_counter()
    bad = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, 5))
        if seed % 2:
            n = int(rng.integers(2, 11))
            sets = oracles.random_coverage_sets(rng, n, universe=int(rng.integers(4, 12)))
            weights = rng.random(len(set().union(*sets))).tolist()
            f = make_explicit_objective(coverage_table(sets, weights))
        else:
            n = int(rng.integers(2, 13))
            f = oracles.random_feature(rng, n, density=float(rng.uniform(0.2, 0.9)))
        opt = oracles.brute_opt(oracles.set_fn(f), n, k)
        if greedy(f, None, k).value < GREEDY_RATIO * opt - TOL:
            bad += 1
    elapsed = time.perf_counter() - t0
    ok = criterion(1, "greedy guarantee", bad == 0 and elapsed < 60,
                   f"{bad}/200 below (1-1/e)*OPT, {elapsed:.1f} s")
    assert ok


def test_lazy_equals_eager(criterion):
    mismatch = fewer = big = 0
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(5, 201))
        f = oracles.random_feature(rng, n, int(rng.integers(5, 60)),
                                   density=float(rng.uniform(0.05, 0.5)))
        # k = 1 forces both to score every singleton once, so laziness needs k >= 2
        k = int(rng.integers(2, min(n, 30) + 1))
        eager, lazy = greedy(f, None, k), lazy_greedy(f, None, k)
        mismatch += eager.selected != lazy.selected
        if n >= 50:
            big += 1
            fewer += lazy.evals_used < eager.evals_used
    ok = criterion(2, "lazy/eager equivalence", mismatch == 0 and fewer >= 0.95 * big,
                   f"{mismatch}/100 mismatched, lazy cheaper on {fewer}/{big} with n >= 50")
    assert ok


def test_weight_inequalities(criterion):
    rng = np.random.default_rng(7)
    cond_bad = gain_bad = agree_bad = 0
    for _ in range(100):
        n = int(rng.integers(4, 11))
        f = oracles.random_feature(rng, n)
        ref = oracles.set_fn(f)
        gw = GraphWeights(f)
        for _ in range(100):
            u, v = rng.choice(n, 2, replace=False).tolist()
            others = [x for x in range(n) if x not in (u, v)]
            S = [x for x in others if rng.random() < 0.5]
            P = [x for x in S if rng.random() < 0.5]
            wS, wP = oracles.weight(ref, n, u, v, S), oracles.weight(ref, n, u, v, P)
            cond_bad += wS > wP + TOL
            agree_bad += abs(conditional_edge_weight(gw, u, v, S) - wS) > TOL
            fS = ref(S)
            gain_bad += ref(S + [v]) - fS > ref(S + [u]) - fS + wS + TOL
    tri_bad = triples = 0
    for seed in range(20):
        r = np.random.default_rng(300 + seed)
        n = int(r.integers(10, 31))
        f = oracles.random_feature(r, n, density=float(r.uniform(0.2, 0.6)))
        W = np.array(oracles.weight_matrix(oracles.set_fn(f), n))
        agree_bad += int(np.count_nonzero(
            np.abs(GraphWeights(f).weight_block(np.arange(n), np.arange(n)) - W) > TOL))
        # T[v, u, x] = w(v, u) + w(u, x); the middle node must differ from both ends
        T = W[:, :, None] + W[None, :, :]
        idx = np.arange(n)
        valid = (idx[None, :, None] != idx[:, None, None]) & (idx[None, :, None] != idx[None, None, :])
        tri_bad += int(np.count_nonzero((W[:, None, :] > T + TOL) & valid))
        triples += int(valid.sum())
    ok = criterion(3, "weight inequalities",
                   cond_bad == 0 and gain_bad == 0 and tri_bad == 0 and agree_bad == 0,
                   f"conditioning {cond_bad}/10000, gain bound {gain_bad}/10000, "
                   f"triangle {tri_bad}/{triples} triples, package/oracle disagreements {agree_bad}")
    assert ok


def test_h_submodular_and_monotone_in_eps(criterion):
    sub_bad = full_bad = mono_bad = agree_bad = 0
    for seed in range(50):
        rng = np.random.default_rng(2000 + seed)
        n = int(rng.integers(3, 9))
        f = oracles.random_feature(rng, n)
        W = oracles.weight_matrix(oracles.set_fn(f), n)
        gw = GraphWeights(f)
        grid = eps_grid(W)
        per_eps = []
        for eps in grid:
            h = SparsificationObjective(SparsificationInstance(gw, eps))
            vals = {S: h.value(S) for S in oracles.subsets(range(n))}
            agree_bad += sum(vals[S] != oracles.h_direct(W, eps, S) for S in vals)
            if eps >= 0:
                agree_bad += sum(vals[S] != oracles.h_set_cover(W, eps, S) for S in vals)
            for S, val in vals.items():
                rest = [x for x in range(n) if x not in S]
                for a, b in itertools.combinations(rest, 2):
                    Sa, Sb = tuple(sorted(S + (a,))), tuple(sorted(S + (b,)))
                    Sab = tuple(sorted(S + (a, b)))
                    sub_bad += vals[Sa] + vals[Sb] < vals[Sab] + val - TOL
            full_bad += vals[tuple(range(n))] != 0
            per_eps.append(vals)
        for S in per_eps[0]:
            seq = [vals[S] for vals in per_eps]
            mono_bad += any(a > b for a, b in zip(seq, seq[1:]))
    ok = criterion(4, "h submodular",
                   sub_bad == 0 and full_bad == 0 and mono_bad == 0 and agree_bad == 0,
                   f"submodularity violations {sub_bad}, h(V) != 0 in {full_bad}, "
                   f"eps-monotonicity violations {mono_bad}, package/oracle disagreements {agree_bad}")
    assert ok


def test_sparsifier_optimum_guarantee(criterion):
    bad = checked = vstar_mismatch = 0
    for seed in range(50):
        rng = np.random.default_rng(3000 + seed)
        n = int(rng.integers(4, 11))
        f = oracles.random_feature(rng, n, max(2, n // 2))
        ref = oracles.set_fn(f)
        k = int(rng.integers(1, 4))
        W = oracles.weight_matrix(ref, n)
        gw = GraphWeights(f)
        opt = oracles.brute_opt(ref, n, k)
        for eps in eps_grid(W, lo=0.0):
            Vstar, _ = oracle_vstar(W, eps)
            vstar_mismatch += exact_sparsifier_optimum(SparsificationInstance(gw, eps))[0] != Vstar
            if len(Vstar) < k:
                continue
            checked += 1
            bad += greedy(f, Vstar, k).value < GREEDY_RATIO * (opt - k * eps) - TOL
    ok = criterion(5, "greedy on the optimal sparsifier", bad == 0 and vstar_mismatch == 0,
                   f"{bad}/{checked} cases below (1-1/e)(OPT - k*eps), "
                   f"V* disagreements {vstar_mismatch}")
    assert ok


def hand_trace(n, r, c):
    s_full = math.ceil(r * math.log2(n))
    size, out = n, []
    while size > r * math.log2(n):
        s = min(size, s_full)
        left = size - s
        removed = math.floor((1 - 1 / math.sqrt(c)) * left)
        out.append((size, s, removed, left - removed))
        size = left - removed
    return out


def test_prune_bookkeeping(criterion):
    trace_bad = iter_bad = frac_bad = runs = 0
    frac = 1 - 1 / math.sqrt(8)
    for n in (512, 1024, 4096):
        f = synth(n, seed=n)
        for r in (2.0, 8.0):
            runs += 1
            _, trace = sparsify(f, None, SparsifierConfig(r=r, c=8.0, seed=1))
            got = [(it["size_before"], it["sample_size"], it["removed_count"], it["kept_size"])
                   for it in trace.iterations]
            trace_bad += got != hand_trace(n, r, 8.0)
            iter_bad += len(trace.iterations) > math.ceil(math.log2(n) / math.log2(math.sqrt(8))) + 1
            for it in trace.iterations:
                left = it["size_before"] - it["sample_size"]
                frac_bad += abs(it["removed_count"] - frac * left) >= 1
    ok = criterion(6, "prune bookkeeping", trace_bad == iter_bad == frac_bad == 0,
                   f"{runs} runs: trace mismatches {trace_bad}, iteration-bound violations "
                   f"{iter_bad}, rounds off {frac:.4f} removal by >= 1 element {frac_bad}")
    assert ok


def best_time(fn, repeats=3):
    out, best = None, math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


@pytest.mark.slow
def test_utility_and_time_vs_n(criterion):
    set_threads(1)
    means, slower = {}, []
    for n in (2000, 5000, 10000, 20000):
        rus = []
        for seed in range(20):
            f = synth(n, seed)
            cfg = SparsifierConfig(r=8, c=8, seed=seed)
            timed = n == 20000

            def ss():
                Vp, _ = sparsify(f, None, cfg)
                return lazy_greedy(f, Vp, 50)
            if timed:
                base, t_lazy = best_time(lambda: lazy_greedy(f, None, 50))
                sol, t_ss = best_time(ss)
                if t_ss >= t_lazy:
                    slower.append((seed, round(t_ss, 3), round(t_lazy, 3)))
            else:
                base, sol = lazy_greedy(f, None, 50), ss()
            rus.append(sol.value / base.value)
        means[n] = statistics.mean(rus)
    ok = criterion(7, "utility and time vs n",
                   all(m >= 0.95 for m in means.values()) and not slower,
                   "mean RU " + ", ".join(f"n={n}: {m:.4f}" for n, m in means.items())
                   + f"; SS not faster at n=20000 on {len(slower)}/20 seeds {slower}")
    assert ok


@pytest.mark.slow
def test_utility_vs_vprime_size(criterion):
    rs = list(range(2, 21, 2))
    rus = {r: [] for r in rs}
    sizes = {r: [] for r in rs}
    for seed in range(20):
        f = synth(2000, seed)
        base = lazy_greedy(f, None, 50).value
        for r in rs:
            Vp, _ = sparsify(f, None, SparsifierConfig(r=r, c=8, seed=seed))
            sizes[r].append(len(Vp))
            rus[r].append(lazy_greedy(f, Vp, 50).value / base)
    curve = sorted((statistics.median(sizes[r]), statistics.median(rus[r])) for r in rs)
    drops = [(a, b) for a, b in zip(curve, curve[1:]) if b[1] < a[1]]
    ok = criterion(8, "utility vs |V'|", not drops and curve[-1][1] > 0.95,
                   "median (|V'|, RU): " + ", ".join(f"({s:g}, {u:.4f})" for s, u in curve)
                   + f"; decreasing steps {len(drops)}")
    assert ok


def test_sieve_streaming(criterion):
    bad = mem_bad = 0
    for seed in range(200):
        rng = np.random.default_rng(4000 + seed)
        n = int(rng.integers(2, 11))
        f = oracles.random_feature(rng, n, density=float(rng.uniform(0.2, 0.9)))
        k = int(rng.integers(1, 5))
        cfg = SieveConfig(n_thresholds=50)
        sol = sieve_streaming(f, rng.permutation(n).tolist(), k, cfg)
        bad += sol.value < 0.4 * oracles.brute_opt(oracles.set_fn(f), n, k) - TOL
        mem_bad += sol.extra["peak_retained"] > cfg.n_thresholds * k
    ok = criterion(9, "sieve streaming", bad == 0 and mem_bad == 0,
                   f"{bad}/200 below 0.4*OPT, {mem_bad} exceeded the retained-id cap")
    assert ok


def test_double_greedy(criterion):
    det_bad = rand_bad = 0
    worst = math.inf
    for seed in range(20):
        rng = np.random.default_rng(5000 + seed)
        n = int(rng.integers(3, 9))
        f = oracles.random_feature(rng, n)
        W = oracles.weight_matrix(oracles.set_fn(f), n)
        eps = float(rng.uniform(0, 1))
        masks = cover_masks(W, eps)
        best = oracle_vstar(W, eps)[1]
        h = SparsificationObjective(SparsificationInstance(GraphWeights(f), eps))
        det_bad += h_mask(masks, double_greedy(h, None)) < best / 3 - TOL
        mean = statistics.mean(h_mask(masks, double_greedy(h, None, "randomized", s))
                               for s in range(500))
        rand_bad += mean < 0.45 * best - TOL
        if best:
            worst = min(worst, mean / best)
    ok = criterion(10, "double greedy", det_bad == 0 and rand_bad == 0,
                   f"deterministic below max/3 in {det_bad}/20, randomized mean below "
                   f"0.45*max in {rand_bad}/20 (worst ratio {worst:.3f})")
    assert ok


def test_pre_prune_safety(criterion):
    bad = 0
    for seed in range(200):
        rng = np.random.default_rng(6000 + seed)
        n = int(rng.integers(2, 13))
        f = oracles.random_feature(rng, n, density=float(rng.uniform(0.2, 0.9)))
        k = int(rng.integers(1, n + 1))
        bad += greedy(f, pre_prune(f, None, k), k).value != greedy(f, None, k).value
    ok = criterion(11, "pre-prune safety", bad == 0, f"{bad}/200 greedy values changed")
    assert ok


_rouge_props = {"cases": 0, "bad": 0}


@settings(max_examples=500, deadline=None)
@given(st.lists(st.sampled_from("abcd"), max_size=15), st.lists(st.sampled_from("abcd"), max_size=15))
def _rouge_property(cand, ref):
    r, p, f1 = rouge2_scores(cand, ref)
    _rouge_props["cases"] += 1
    _rouge_props["bad"] += not (0 <= r <= 1 and f1 <= 2 * min(r, p) + 1e-12)
    want = oracles.rouge2_oracle(cand, ref)
    _rouge_props["bad"] += any(abs(a - b) > 1e-12 for a, b in zip((r, p, f1), want))


def test_rouge(criterion):
    hand = [
        (rouge2(list("abcab"), list("abcab")), (1.0, 1.0)),
        (rouge2(["a", "b", "c"], ["a", "b", "d"]), (0.5, 0.5)),
        (rouge2(["a", "b"], ["c", "d"]), (0.0, 0.0)),
    ]
    hand_bad = sum(got != want for got, want in hand)
    _rouge_property()
    ok = criterion(12, "ROUGE-2", hand_bad == 0 and _rouge_props["bad"] == 0,
                   f"hand examples wrong {hand_bad}/3, property violations "
                   f"{_rouge_props['bad']}/{_rouge_props['cases']}")
    assert ok


def test_cli_determinism(criterion, tmp_path, capsys):
    data = tmp_path / "m.txt"
    save_feature_matrix(generate_synthetic(SynthConfig(n_elements=3000, seed=11)), data)
    suite = tmp_path / "suite.json"
    suite.write_text(json.dumps({
        "datasets": [{"id": "a", "synth": {"n_elements": 1500}}, {"id": "b", "path": str(data)}],
        "algorithms": ["greedy", "lazy_greedy", "sieve", "ss"], "k": 20}))
    outputs = {"sparsify": [], "benchmark": []}
    for i, threads in enumerate([1, 1, 8]):
        tr, vs = tmp_path / f"trace{i}.json", tmp_path / f"set{i}.txt"
        code_s = main(["sparsify", "--input", str(data), "--seed", "5", "--threads", str(threads),
                       "--out", str(tr), "--out-set", str(vs)])
        bj, bc = tmp_path / f"bench{i}.json", tmp_path / f"bench{i}.csv"
        code_b = main(["benchmark", "--suite", str(suite), "--seeds", "0", "1", "--no-timings",
                       "--threads", str(threads), "--out", str(bj), "--out-csv", str(bc)])
        assert code_s == code_b == 0
        outputs["sparsify"].append(tr.read_bytes() + vs.read_bytes())
        outputs["benchmark"].append(bj.read_bytes() + bc.read_bytes())
    capsys.readouterr()
    same = {k: len(set(v)) == 1 for k, v in outputs.items()}
    ok = criterion(13, "CLI determinism", all(same.values()),
                   ", ".join(f"{k} {'identical' if v else 'DIFFERS'} over runs 1/1/8 threads"
                             for k, v in same.items()))
    assert ok
