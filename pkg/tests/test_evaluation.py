import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from subsparse import SparsifierConfig, greedy, lazy_greedy, \
    relative_utility, rouge2, run_benchmark, sparsify
from subsparse.data import SynthConfig, generate_synthetic, save_feature_matrix
from subsparse.errors import InputError
from subsparse.evaluation import REPORT_COLUMNS, rouge2_scores

import oracles

tokens = st.lists(st.sampled_from(list("abcde")), max_size=12)


class TestRouge:
    def test_identity(self):
        assert rouge2(list("abcab"), list("abcab")) == (1.0, 1.0)

    def test_hand_example(self):
        assert rouge2(["a", "b", "c"], ["a", "b", "d"]) == (0.5, 0.5)

    def test_disjoint(self):
        assert rouge2(["a", "b"], ["c", "d"]) == (0.0, 0.0)

    def test_short_reference(self):
        assert rouge2(["a", "b"], ["a"]) == (0.0, 0.0)

    def test_clipping(self):
        # candidate repeats "a b" three times; reference has it once
        r, p, f1 = rouge2_scores(list("ababab"), list("abx"))
        assert (r, p) == (0.5, 0.2)

    @given(tokens, tokens)
    def test_matches_oracle(self, cand, ref):
        got = rouge2_scores(cand, ref)
        assert got == pytest.approx(oracles.rouge2_oracle(cand, ref), abs=1e-12)

    @given(tokens, tokens)
    def test_bounds_and_f1_symmetry(self, cand, ref):
        r, p, f1 = rouge2_scores(cand, ref)
        assert 0 <= r <= 1 and 0 <= p <= 1
        assert f1 <= 2 * min(r, p) + 1e-12
        assert rouge2_scores(ref, cand)[2] == pytest.approx(f1, abs=1e-12)


class TestRelativeUtility:
    def test_examples(self):
        f = oracles.random_feature(np.random.default_rng(0), 8)
        sol = greedy(f, None, 3)
        assert relative_utility(sol, sol) == 1.0
        assert relative_utility(3.9, 4.0) == pytest.approx(0.975)
        assert relative_utility(1.0, 0.0) is None

    def test_ss_on_tiny_instance_is_one(self):
        f = oracles.random_feature(np.random.default_rng(1), 12)
        Vp, _ = sparsify(f, None, SparsifierConfig(r=8))
        assert Vp == list(range(12))
        assert relative_utility(lazy_greedy(f, Vp, 4), greedy(f, None, 4)) == 1.0


def small_suite(**kw):
    suite = {
        "datasets": [{"id": "a", "synth": {"n_elements": 400, "n_features": 600}},
                     {"id": "b", "synth": {"n_elements": 300, "weight_law": "zipf"}}],
        "algorithms": ["greedy", "lazy_greedy", "sieve", "ss"],
        "k": 8,
        "seeds": [0, 1],
        "ss": {"r": 2},
    }
    suite.update(kw)
    return suite


class TestBenchmark:
    def test_greedy_only(self):
        rep = run_benchmark(small_suite(algorithms=["greedy"]))
        assert rep.rows and all(r["relative_utility"] == 1.0 for r in rep.rows)

    def test_rows_consistent(self):
        rep = run_benchmark(small_suite())
        assert len(rep.rows) == 2 * 2 * 4 and not rep.failures
        base = {(r["dataset_id"], r["seed"]): r["value"] for r in rep.rows
                if r["algorithm"] == "greedy"}
        for r in rep.rows:
            assert set(r) == set(REPORT_COLUMNS)
            assert r["relative_utility"] == r["value"] / base[r["dataset_id"], r["seed"]]
            assert (r["vprime_size"] is not None) == (r["algorithm"] == "ss")
        assert rep.rows == rep.sorted_rows()

    def test_values_deterministic(self):
        strip = lambda rep: [{k: v for k, v in r.items() if k != "wall_time_s"} for r in rep.rows]
        assert strip(run_benchmark(small_suite())) == strip(run_benchmark(small_suite()))

    def test_no_timings(self):
        rep = run_benchmark(small_suite(timings=False))
        assert all(r["wall_time_s"] is None for r in rep.rows)

    def test_csv_and_json(self, tmp_path):
        rep = run_benchmark(small_suite(timings=False))
        rows = list(csv.reader(io.StringIO(rep.to_csv())))
        assert rows[0] == REPORT_COLUMNS and len(rows) == len(rep.rows) + 1
        doc = json.loads(rep.to_json())
        assert doc["rows"] == rep.rows and "version" in doc
        rep.write(tmp_path / "r.csv", tmp_path / "r.json")
        assert (tmp_path / "r.csv").read_text() == rep.to_csv()

    def test_r_sweep_labels(self):
        rep = run_benchmark(small_suite(algorithms=["ss"], r_sweep=[2, 4], seeds=[0]))
        assert sorted({r["algorithm"] for r in rep.rows}) == ["ss_r2", "ss_r4"]

    def test_failures_recorded(self, tmp_path):
        suite = small_suite(datasets=[{"id": "bad", "path": str(tmp_path / "none.txt")},
                                      {"id": "ok", "synth": {"n_elements": 100}}],
                            seeds=[0])
        rep = run_benchmark(suite)
        assert [f["dataset_id"] for f in rep.failures] == ["bad"]
        assert {r["dataset_id"] for r in rep.rows} == {"ok"}

    def test_path_and_auto_k(self, tmp_path):
        p = tmp_path / "m.txt"
        save_feature_matrix(generate_synthetic(SynthConfig(n_elements=40)), p)
        rep = run_benchmark({"datasets": [{"id": "f", "path": str(p)}],
                             "algorithms": ["lazy_greedy"], "k": "auto"})
        assert rep.rows[0]["k"] == 6

    @pytest.mark.parametrize("suite", [{}, {"datasets": [{"synth": {}}]},
                                       {"datasets": [{"id": "x"}], "algorithms": ["magic"]}])
    def test_bad_suite(self, suite):
        with pytest.raises(InputError):
            run_benchmark(suite)

    def test_sieve_below_ss_mostly(self):
        suite = {"datasets": [{"id": "s", "synth": {"n_elements": 2000}}],
                 "algorithms": ["sieve", "ss"], "k": 50, "seeds": list(range(5))}
        rep = run_benchmark(suite)
        ru = {}
        for r in rep.rows:
            ru[r["seed"], r["algorithm"]] = r["relative_utility"]
        wins = sum(ru[s, "sieve"] < ru[s, "ss"] for s in range(5))
        assert wins >= 4
