"""Quality metrics and the benchmark harness."""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from ._parallel import ordered_map
from .data import SynthConfig, generate_synthetic, load_corpus_dir, load_feature_matrix, \
    reference_budget, tfidf_featurize
from .errors import InputError
from .maximizers import SieveConfig, Solution, greedy, lazy_greedy, sieve_streaming
from .objectives import FeatureSqrtObjective
from .sparsifier import SparsifierConfig, sparsify

log = logging.getLogger(__name__)

REPORT_COLUMNS = ["dataset_id", "n", "algorithm", "k", "value", "relative_utility",
                  "vprime_size", "wall_time_s", "evals_used", "seed"]
ALGORITHMS = ("greedy", "lazy_greedy", "sieve", "ss")


def _bigrams(tokens: Sequence[str]) -> Counter:
    return Counter(zip(tokens, tokens[1:]))


def rouge2(candidate: Sequence[str], reference: Sequence[str]) -> tuple[float, float]:
    """ROUGE-2 ``(recall, f1)`` with clipped bigram counts."""
    recall, _, f1 = rouge2_scores(candidate, reference)
    return recall, f1


def rouge2_scores(candidate, reference) -> tuple[float, float, float]:
    ref = _bigrams(list(reference))
    cand = _bigrams(list(candidate))
    if not ref or not cand:
        return 0.0, 0.0, 0.0
    overlap = sum((ref & cand).values())
    recall = overlap / sum(ref.values())
    precision = overlap / sum(cand.values())
    f1 = 0.0 if overlap == 0 else 2 * precision * recall / (precision + recall)
    return recall, precision, f1


def relative_utility(sol: Solution | float, baseline: Solution | float) -> float | None:
    """f(S) / f(S_greedy); None when the baseline value is zero."""
    v = sol.value if isinstance(sol, Solution) else float(sol)
    b = baseline.value if isinstance(baseline, Solution) else float(baseline)
    if b == 0:
        return None
    return v / b


@dataclass
class BenchmarkReport:
    rows: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    failures: list[dict] = field(default_factory=list)

    def sorted_rows(self) -> list[dict]:
        return sorted(self.rows, key=lambda r: (r["dataset_id"], r["seed"], r["k"],
                                                r["algorithm"]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.sorted_rows():
            w.writerow(["" if r.get(c) is None else (repr(r[c]) if isinstance(r[c], float) else r[c])
                        for c in REPORT_COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"version": __version__, "config": self.config,
                           "rows": self.sorted_rows(), "failures": self.failures},
                          sort_keys=True, indent=1)

    def write(self, csv_path=None, json_path=None) -> None:
        if csv_path:
            Path(csv_path).write_text(self.to_csv(), encoding="utf-8")
        if json_path:
            Path(json_path).write_text(self.to_json(), encoding="utf-8")


def _load_dataset(spec: dict, seed: int):
    """Returns ``(objective, corpus or None)``."""
    if "synth" in spec:
        synth = dict(spec["synth"])
        synth["seed"] = int(synth.get("seed", 0)) + int(seed)
        return FeatureSqrtObjective(generate_synthetic(SynthConfig.from_dict(synth))), None
    if "path" in spec:
        return FeatureSqrtObjective(load_feature_matrix(spec["path"])), None
    if "corpus" in spec:
        corpus = load_corpus_dir(spec["corpus"])
        return FeatureSqrtObjective(tfidf_featurize(corpus)), corpus
    raise InputError(f"dataset {spec.get('id')!r} needs one of synth/path/corpus")


def _resolve_k(rule, objective, corpus) -> int:
    if rule in (None, "auto"):
        return reference_budget(corpus, objective.n)
    return int(rule)


def _cell(job):
    spec, seed, cfg = job
    ds_id = spec["id"]
    timings = cfg["timings"]
    rows, failures = [], []
    try:
        objective, corpus = _load_dataset(spec, seed)
        k = _resolve_k(cfg["k"], objective, corpus)
        base = lazy_greedy(objective, None, k)
    except Exception as exc:  # one bad dataset must not sink the suite
        log.warning("dataset %s seed %s failed: %s", ds_id, seed, exc)
        return [], [{"dataset_id": ds_id, "seed": seed, "algorithm": "*", "error": str(exc)}]

    def row(alg, sol, vprime=None):
        return {"dataset_id": ds_id, "n": objective.n, "algorithm": alg, "k": k,
                "value": sol.value, "relative_utility": relative_utility(sol, base),
                "vprime_size": vprime,
                "wall_time_s": sol.wall_time if timings else None,
                "evals_used": sol.evals_used, "seed": seed}

    ss_cfg = cfg["ss"]
    r_values = cfg["r_sweep"] or [ss_cfg.get("r", 8.0)]
    for alg in cfg["algorithms"]:
        try:
            if alg == "lazy_greedy":
                rows.append(row(alg, base))
            elif alg == "greedy":
                rows.append(row(alg, greedy(objective, None, k)))
            elif alg == "sieve":
                sc = SieveConfig(n_thresholds=int(cfg["sieve"].get("n_thresholds", 50)))
                rows.append(row(alg, sieve_streaming(objective, range(objective.n), k, sc)))
            elif alg == "ss":
                for r in r_values:
                    sol, vp = run_ss(objective, k, SparsifierConfig(
                        r=float(r), c=float(ss_cfg.get("c", 8.0)), seed=int(seed),
                        sampling=ss_cfg.get("sampling", "uniform"),
                        pre_prune=bool(ss_cfg.get("pre_prune", False)),
                        post_reduce=ss_cfg.get("post_reduce")))
                    label = "ss" if not cfg["r_sweep"] else f"ss_r{r:g}"
                    rows.append(row(label, sol, vp))
            else:
                raise InputError(f"unknown algorithm {alg!r}")
        except Exception as exc:
            log.warning("%s on %s seed %s failed: %s", alg, ds_id, seed, exc)
            failures.append({"dataset_id": ds_id, "seed": seed, "algorithm": alg,
                             "error": str(exc)})
    return rows, failures


def run_ss(objective, k: int, cfg: SparsifierConfig) -> tuple[Solution, int]:
    """Sparsify, then lazy greedy on the reduced set; time covers both."""
    import time
    t0 = time.perf_counter()
    Vp, _ = sparsify(objective, None, cfg, k=k)
    sol = lazy_greedy(objective, Vp, k)
    sol.wall_time = time.perf_counter() - t0
    sol.algorithm = "ss"
    return sol, len(Vp)


def normalize_suite(suite: dict) -> dict:
    if not suite.get("datasets"):
        raise InputError("suite lists no datasets")
    algs = list(suite.get("algorithms", ["lazy_greedy", "ss"]))
    bad = [a for a in algs if a not in ALGORITHMS]
    if bad:
        raise InputError(f"unknown algorithms {bad}; choose from {list(ALGORITHMS)}")
    for d in suite["datasets"]:
        if "id" not in d:
            raise InputError("every dataset needs an id")
    return {
        "datasets": suite["datasets"],
        "algorithms": algs,
        "k": suite.get("k", "auto"),
        "seeds": [int(s) for s in suite.get("seeds", [0])],
        "ss": dict(suite.get("ss", {})),
        "r_sweep": [float(r) for r in suite.get("r_sweep", [])],
        "sieve": dict(suite.get("sieve", {"n_thresholds": 50})),
        "timings": bool(suite.get("timings", True)),
    }


def run_benchmark(suite_cfg: dict) -> BenchmarkReport:
    """Run every (dataset, seed) cell; rows come back sorted.

    Each cell computes the lazy-greedy baseline first; relative utility of
    every row is measured against it.
    """
    cfg = normalize_suite(suite_cfg)
    jobs = [(d, s, cfg) for d in cfg["datasets"] for s in cfg["seeds"]]
    report = BenchmarkReport(config=cfg)
    for rows, failures in ordered_map(_cell, jobs):
        report.rows.extend(rows)
        report.failures.extend(failures)
    report.rows = report.sorted_rows()
    return report
