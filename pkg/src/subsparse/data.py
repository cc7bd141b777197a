"""Dataset ingestion: text corpora, TF-IDF features, synthetic data, matrix files."""

from __future__ import annotations

import csv
import json
import math
import re
import warnings
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InputError
from .objectives import FeatureMatrix, SimilarityMatrix

_SENTENCE_END = re.compile(r"(?<=[.?!])\s+")
_TOKEN = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    min_token_length: int = 1


@dataclass
class Document:
    doc_id: str
    sentences: list[list[str]]
    texts: list[str] = field(default_factory=list)


@dataclass
class Corpus:
    documents: list[Document]
    reference_summaries: list[list[str]] | None = None

    def sentences(self) -> list[list[str]]:
        return [s for d in self.documents for s in d.sentences]

    def sentence_texts(self) -> list[str]:
        return [t for d in self.documents for t in d.texts]

    def reference_tokens(self) -> list[str]:
        return [t for s in (self.reference_summaries or []) for t in s]


def tokenize(text: str, cfg: TokenizerConfig | None = None) -> list[str]:
    cfg = cfg or TokenizerConfig()
    if cfg.lowercase:
        text = text.lower()
    return [t for t in _TOKEN.findall(text) if len(t) >= cfg.min_token_length]


def split_sentences(text: str, cfg: TokenizerConfig | None = None):
    """Return ``(raw sentence, tokens)`` pairs; sentences without tokens are dropped."""
    out = []
    for raw in _SENTENCE_END.split(text.strip()):
        toks = tokenize(raw, cfg)
        if toks:
            out.append((raw.strip(), toks))
    return out


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def ingest_corpus(paths: Iterable, tokenizer_cfg: TokenizerConfig | None = None,
                  reference_paths: Iterable = ()) -> Corpus:
    """One document per file; sentences split on ``.?!`` followed by whitespace."""
    docs = []
    for p in paths:
        p = Path(p)
        pairs = split_sentences(_read_text(p), tokenizer_cfg)
        if not pairs:
            warnings.warn(f"{p}: document has no sentences", stacklevel=2)
        docs.append(Document(p.stem, [t for _, t in pairs], [r for r, _ in pairs]))
    refs = None
    reference_paths = list(reference_paths)
    if reference_paths:
        refs = []
        for p in reference_paths:
            refs.extend(t for _, t in split_sentences(_read_text(Path(p)), tokenizer_cfg))
    return Corpus(docs, refs)


def load_corpus_dir(root, tokenizer_cfg: TokenizerConfig | None = None) -> Corpus:
    """Read ``root/docs/*.txt`` and the optional ``root/refs/*.txt``."""
    root = Path(root)
    docs = sorted((root / "docs").glob("*.txt"))
    if not docs:
        raise InputError(f"{root}/docs contains no .txt files")
    refs = sorted((root / "refs").glob("*.txt")) if (root / "refs").is_dir() else []
    return ingest_corpus(docs, tokenizer_cfg, refs)


def build_vocabulary(corpus: Corpus) -> list[str]:
    return sorted({t for s in corpus.sentences() for t in s})


def tfidf_featurize(corpus: Corpus) -> FeatureMatrix:
    """Sentences x terms with weight tf * ln(1 + N / df), N = sentence count."""
    sents = corpus.sentences()
    if not sents:
        raise InputError("corpus has no sentences")
    vocab = build_vocabulary(corpus)
    if not vocab:
        raise InputError("corpus vocabulary is empty")
    col = {t: j for j, t in enumerate(vocab)}
    df = Counter(t for s in sents for t in set(s))
    N = len(sents)
    idf = {t: math.log(1.0 + N / df[t]) for t in vocab}
    rows, cols, vals = [], [], []
    for i, s in enumerate(sents):
        for t, tf in sorted(Counter(s).items()):
            rows.append(i)
            cols.append(col[t])
            vals.append(tf * idf[t])
    return FeatureMatrix.from_triples(N, len(vocab), rows, cols, vals)


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SynthConfig:
    n_elements: int = 1000
    n_features: int = 2000
    nnz_per_element: int = 15
    weight_law: str = "uniform"
    zipf_s: float = 2.0
    cluster_count: int = 20
    noise: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.nnz_per_element > self.n_features:
            raise InputError("nnz_per_element cannot exceed n_features")
        if min(self.n_elements, self.n_features, self.nnz_per_element, self.cluster_count) < 1:
            raise InputError("synthetic sizes must be positive")
        if self.weight_law not in ("uniform", "zipf"):
            raise InputError(f"unknown weight law {self.weight_law!r}")
        if not 0.0 <= self.noise <= 1.0:
            raise InputError("noise must lie in [0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        unknown = set(d) - set(known)
        if unknown:
            raise InputError(f"unknown synthetic config keys: {sorted(unknown)}")
        return cls(**known)

    def to_dict(self) -> dict:
        return asdict(self)


def _draw_weights(rng, cfg: SynthConfig, size):
    if cfg.weight_law == "uniform":
        return 1.0 - rng.random(size)  # (0, 1]
    return rng.zipf(cfg.zipf_s, size).astype(np.float64)


def generate_synthetic(cfg: SynthConfig) -> FeatureMatrix:
    """Clustered sparse features with heavy redundancy.

    Each cluster owns a pool of features and a centroid row.  An element
    copies its cluster's centroid, then swaps each feature for a random one
    from the pool with probability ``noise`` and jitters the kept weights
    by a log-normal factor of scale ``noise``.  With ``noise = 0`` every
    element of a cluster is an exact duplicate of the centroid.
    """
    rng = np.random.default_rng(cfg.seed)
    n, F, d, C = cfg.n_elements, cfg.n_features, cfg.nnz_per_element, cfg.cluster_count
    pool_size = max(d, F // C)
    pools = np.stack([rng.choice(F, pool_size, replace=False) for _ in range(C)])
    cent_pos = np.stack([rng.choice(pool_size, d, replace=False) for _ in range(C)])
    cent_feat = np.take_along_axis(pools, cent_pos, axis=1)
    cent_w = _draw_weights(rng, cfg, (C, d))

    assign = rng.integers(C, size=n)
    swap = rng.random((n, d)) < cfg.noise
    repl = pools[assign[:, None], rng.integers(pool_size, size=(n, d))]
    feats = np.where(swap, repl, cent_feat[assign])
    jitter = np.exp(cfg.noise * rng.standard_normal((n, d)))
    weights = np.where(swap, _draw_weights(rng, cfg, (n, d)), cent_w[assign] * jitter)

    rows = np.repeat(np.arange(n), d)
    m = sp.coo_matrix((weights.ravel(), (rows, feats.ravel())), shape=(n, F)).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return FeatureMatrix(m)


# ---------------------------------------------------------------------------
# files


def save_feature_matrix(matrix: FeatureMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{matrix.n_elements} {matrix.n_features}\n")
        for r, c, w in matrix.entries():
            fh.write(f"{r} {c} {w!r}\n")


def load_feature_matrix(path) -> FeatureMatrix:
    """Read the triple format; errors carry the offending line number.

    The header may carry an optional third field, the entry count, which
    is then checked against the number of triples read.
    """
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    with fh:
        header = None
        rows, cols, vals = [], [], []
        seen = set()
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if header is None:
                if len(parts) not in (2, 3):
                    raise InputError(f"{path}:{lineno}: header must be 'n_elements n_features'")
                try:
                    header = [int(x) for x in parts]
                except ValueError:
                    raise InputError(f"{path}:{lineno}: non-integer header") from None
                if min(header) < 0:
                    raise InputError(f"{path}:{lineno}: negative header value")
                continue
            if len(parts) != 3:
                raise InputError(f"{path}:{lineno}: expected 'element_id feature_id weight'")
            try:
                r, c, w = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise InputError(f"{path}:{lineno}: malformed entry") from None
            if not (0 <= r < header[0] and 0 <= c < header[1]):
                raise InputError(f"{path}:{lineno}: id outside header dimensions "
                                 f"{header[0]} x {header[1]}")
            if not w >= 0 or not math.isfinite(w):
                raise InputError(f"{path}:{lineno}: weight must be finite and nonnegative")
            if (r, c) in seen:
                raise InputError(f"{path}:{lineno}: duplicate entry ({r}, {c})")
            seen.add((r, c))
            rows.append(r)
            cols.append(c)
            vals.append(w)
    if header is None:
        raise InputError(f"{path}: empty file")
    if len(header) == 3 and header[2] != len(rows):
        raise InputError(f"{path}: header announces {header[2]} entries, found {len(rows)}")
    return FeatureMatrix.from_triples(header[0], header[1], rows, cols, vals)


def load_similarity_csv(path) -> SimilarityMatrix:
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        data = np.array([[float(x) for x in r] for r in rows])
    except ValueError:
        raise InputError(f"{path}: non-numeric similarity") from None
    if data.ndim != 2:
        raise InputError(f"{path}: ragged similarity rows")
    return SimilarityMatrix(data)


def load_synth_config(path) -> SynthConfig:
    try:
        return SynthConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read synthetic config {path}: {exc}") from exc


def reference_budget(corpus: Corpus | None, n: int) -> int:
    """Reference-summary sentence count if known, else ceil(0.15 n)."""
    if corpus is not None and corpus.reference_summaries:
        return len(corpus.reference_summaries)
    return max(1, math.ceil(0.15 * n))


def sentence_tokens(corpus: Corpus, selected: Sequence[int]) -> list[str]:
    sents = corpus.sentences()
    return [t for i in selected for t in sents[i]]
