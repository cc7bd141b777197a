"""Command-line entry point.

Exit codes: 0 success, 1 bad input or usage, 2 internal invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, _parallel
from ._parallel import ENV_VAR, set_threads
from .data import (load_corpus_dir, load_feature_matrix, load_similarity_csv, load_synth_config,
                   generate_synthetic, reference_budget, save_feature_matrix, sentence_tokens,
                   tfidf_featurize)
from .errors import InputError, InvariantError
from .evaluation import rouge2_scores, run_benchmark
from .graph import GraphWeights
from .maximizers import SieveConfig, greedy, lazy_greedy, sieve_streaming
from .objectives import FacilityLocationObjective, FeatureSqrtObjective
from .sparsifier import SparsifierConfig, pre_prune, sparsify
from .validation import format_table, run_validation

log = logging.getLogger("subsparse")

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# settings that cannot change results stay out of the echoed config, so
# outputs match byte for byte across thread caps and destinations
_NOT_ECHOED = {"func", "threads", "verbose", "out", "out_set", "out_csv", "out_matrix"}


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}


def _header(args) -> dict:
    return {"tool": "subsparse", "version": __version__, "config": _resolved(args)}


# ---------------------------------------------------------------------------
# input sources


def _add_source(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--input", help="feature matrix file (triple format)")
    g.add_argument("--similarity", help="similarity matrix CSV (facility location)")
    g.add_argument("--corpus", help="corpus directory with docs/*.txt and optional refs/*.txt")
    g.add_argument("--synth", help="synthetic data config JSON")


def _load_objective(args):
    """Return ``(objective, corpus or None)`` for the selected source."""
    if args.input:
        return FeatureSqrtObjective(load_feature_matrix(args.input)), None
    if args.similarity:
        return FacilityLocationObjective(load_similarity_csv(args.similarity)), None
    if args.corpus:
        corpus = load_corpus_dir(args.corpus)
        return FeatureSqrtObjective(tfidf_featurize(corpus)), corpus
    return FeatureSqrtObjective(generate_synthetic(load_synth_config(args.synth))), None


def _add_ss_flags(p):
    p.add_argument("--r", type=float, default=8.0)
    p.add_argument("--c", type=float, default=8.0)
    p.add_argument("--sampling", choices=["uniform", "importance"], default="uniform")
    p.add_argument("--pre-prune", action="store_true")
    p.add_argument("--post-reduce-eps", type=float, default=None)


def _ss_config(args) -> SparsifierConfig:
    return SparsifierConfig(r=args.r, c=args.c, seed=args.seed, sampling=args.sampling,
                            pre_prune=args.pre_prune, post_reduce=args.post_reduce_eps)


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args) -> int:
    corpus = load_corpus_dir(args.corpus)
    matrix = tfidf_featurize(corpus)
    if args.out_matrix:
        save_feature_matrix(matrix, args.out_matrix)
    report = _header(args)
    report.update({
        "documents": [{"doc_id": d.doc_id, "sentences": len(d.sentences)}
                      for d in corpus.documents],
        "n_elements": matrix.n_elements,
        "n_features": matrix.n_features,
        "nnz": int(matrix.csr.nnz),
        "reference_sentences": len(corpus.reference_summaries or []),
    })
    _emit(_dump(report), args.out)
    return EXIT_OK


def cmd_sparsify(args) -> int:
    objective, _ = _load_objective(args)
    Vp, trace = sparsify(objective, None, _ss_config(args), k=args.k)
    out = _header(args)
    out["trace"] = trace.to_dict()
    _emit(_dump(out), args.out)
    if args.out_set:
        Path(args.out_set).write_text("".join(f"{v}\n" for v in Vp), encoding="utf-8")
    return EXIT_OK


def cmd_summarize(args) -> int:
    objective, corpus = _load_objective(args)
    k = args.k if args.k is not None else reference_budget(corpus, objective.n)
    ground = list(range(objective.n))
    stages = {"n": objective.n, "k": k}
    if args.pre_prune:
        ground = pre_prune(objective, ground, k)
        stages["pre_pruned_size"] = len(ground)
    if args.sparsify:
        cfg = _ss_config(args)
        cfg = SparsifierConfig(**{**asdict(cfg), "pre_prune": False})
        ground, trace = sparsify(objective, ground, cfg, k=k)
        stages["vprime_size"] = len(ground)
        stages["sparsify_iterations"] = len(trace.iterations)
    if args.algo == "greedy":
        sol = greedy(objective, ground, k)
    elif args.algo == "lazy_greedy":
        sol = lazy_greedy(objective, ground, k)
    else:
        cfg = SieveConfig(n_thresholds=args.thresholds)
        sol = sieve_streaming(objective, ground, k, cfg)
    out = _header(args)
    out["stages"] = stages
    out["solution"] = sol.to_dict(timings=not args.no_timings)
    if corpus is not None:
        texts = corpus.sentence_texts()
        out["summary"] = [texts[i] for i in sol.selected]
        if corpus.reference_summaries:
            rec, prec, f1 = rouge2_scores(sentence_tokens(corpus, sol.selected),
                                          corpus.reference_tokens())
            out["rouge2"] = {"recall": rec, "precision": prec, "f1": f1}
    _emit(_dump(out), args.out)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    try:
        suite = json.loads(Path(args.suite).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read suite {args.suite}: {exc}") from exc
    if not isinstance(suite, dict):
        raise InputError("suite must be a JSON object")
    if args.no_timings:
        suite["timings"] = False
    if args.seeds:
        suite["seeds"] = args.seeds
    report = run_benchmark(suite)
    if args.out_csv:
        Path(args.out_csv).write_text(report.to_csv(), encoding="utf-8")
    doc = _header(args)
    body = json.loads(report.to_json())
    doc.update(suite=body["config"], rows=body["rows"], failures=body["failures"])
    _emit(_dump(doc), args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    results = run_validation(seed=args.seed, quick=args.quick)
    print(f"subsparse {__version__} validate seed={args.seed} quick={args.quick}")
    print(format_table(results))
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_INVARIANT if failed else EXIT_OK


def cmd_graph_audit(args) -> int:
    objective, _ = _load_objective(args)
    rng = np.random.default_rng(args.seed)
    weights = GraphWeights(objective)
    U = rng.integers(objective.n, size=args.samples)
    V = rng.integers(objective.n, size=args.samples)
    buf = io.StringIO()
    buf.write("# " + json.dumps(_header(args), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u", "v", "w_uv", "f_v_given_u", "global_gain_u"])
    for u, v in zip(U.tolist(), V.tolist()):
        wuv = weights.edge_weight(u, v)
        g = float(weights.globals[u])
        w.writerow([u, v, repr(wuv), repr(wuv + g), repr(g)])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker cap (default: ${ENV_VAR} or 1)")
    common.add_argument("--no-timings", action="store_true",
                        help="omit wall-clock fields so output is reproducible")
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("--out", help="output path (default stdout)")

    parser = _Parser(prog="subsparse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"subsparse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common], help="corpus to TF-IDF feature matrix")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-matrix")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("sparsify", parents=[common], help="reduce the ground set")
    _add_source(p)
    _add_ss_flags(p)
    p.add_argument("--k", type=int, default=None, help="budget, needed by --pre-prune")
    p.add_argument("--out-set", help="write the reduced ids, one per line")
    p.set_defaults(func=cmd_sparsify)

    p = sub.add_parser("summarize", parents=[common], help="select k elements")
    _add_source(p)
    _add_ss_flags(p)
    p.add_argument("--k", type=int, default=None,
                   help="budget (default: reference sentence count, else ceil(0.15 n))")
    p.add_argument("--algo", choices=["greedy", "lazy_greedy", "sieve"], default="lazy_greedy")
    p.add_argument("--sparsify", action="store_true", help="reduce the ground set first")
    p.add_argument("--thresholds", type=int, default=50, help="sieve threshold count")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("benchmark", parents=[common], help="run a benchmark suite")
    p.add_argument("--suite", required=True, help="suite JSON")
    p.add_argument("--seeds", type=int, nargs="+", help="override the suite's seeds")
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("validate", parents=[common], help="run the property suite")
    p.add_argument("--quick", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("graph-audit", parents=[common], help="dump sampled edge weights as CSV")
    _add_source(p)
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(func=cmd_graph_audit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    previous = _parallel._threads
    if args.threads is not None:
        if args.threads < 1:
            print("subsparse: error: --threads must be >= 1", file=sys.stderr)
            return EXIT_INPUT
        set_threads(args.threads)
    try:
        return args.func(args)
    except InvariantError as exc:
        print(f"subsparse: invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except InputError as exc:
        print(f"subsparse: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    finally:
        set_threads(previous)


if __name__ == "__main__":
    sys.exit(main())
