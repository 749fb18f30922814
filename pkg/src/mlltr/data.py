"""Query-grouped multi-label ranking datasets.

Reads LETOR / SVMlight text (``<label> qid:<id> <idx>:<val> ...``), promotes
selected feature columns to extra relevance labels, and caches parsed data in
a small little-endian binary format.
"""
from __future__ import annotations

import io
import struct
import warnings
from dataclasses import dataclass, field
from typing import IO, Iterable, List, Optional, Sequence, Union

import numpy as np

CACHE_MAGIC = b"MLTRDS"
CACHE_VERSION = 1


class LetorParseError(ValueError):
    """Raised on a malformed LETOR line; carries the 1-based line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class QueryGroup:
    query_id: str
    features: np.ndarray  # (n_q, p)
    labels: np.ndarray  # (n_q, K)

    @property
    def n_items(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class LabelPromotionSpec:
    promoted_feature_indices: Sequence[int]
    keep_original_label: bool = True
    names: Optional[Sequence[str]] = None


@dataclass
class MultiLabelDataset:
    """Items stored flat and query-contiguous.

    ``labels`` hold the ordinal levels used for NDCG gains; ``raw_labels``
    keep the untouched values (continuous for promoted feature columns) and
    drive the pair sets when the NDCG weighting is switched off.
    """

    features: np.ndarray  # (M, p)
    labels: np.ndarray  # (M, K)
    query_offsets: np.ndarray  # (m + 1,)
    query_ids: List[str]
    label_names: List[str] = field(default_factory=list)
    raw_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.float64)
        if labels.ndim == 1:
            labels = labels[:, None]
        self.labels = np.ascontiguousarray(labels)
        if self.raw_labels is None:
            self.raw_labels = self.labels.copy()
        else:
            raw = np.asarray(self.raw_labels, dtype=np.float64)
            self.raw_labels = np.ascontiguousarray(raw[:, None] if raw.ndim == 1 else raw)
        self.query_offsets = np.asarray(self.query_offsets, dtype=np.int64)
        self.query_ids = [str(q) for q in self.query_ids]
        if not self.label_names:
            self.label_names = [f"label{k}" for k in range(self.labels.shape[1])]
        self.label_names = list(self.label_names)

        M = self.features.shape[0]
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if len(self.query_ids) < 1:
            raise ValueError("dataset needs at least one query")
        if self.labels.shape[0] != M or self.raw_labels.shape != self.labels.shape:
            raise ValueError("label arrays do not match the number of items")
        if len(self.label_names) != self.labels.shape[1]:
            raise ValueError("one name per label column is required")
        offs = self.query_offsets
        if offs.shape != (len(self.query_ids) + 1,) or offs[0] != 0 or offs[-1] != M:
            raise ValueError("query_offsets must run from 0 to the item count")
        if np.any(np.diff(offs) < 1):
            raise ValueError("every query needs at least one item")

    @property
    def n_items(self) -> int:
        return self.features.shape[0]

    @property
    def n_queries(self) -> int:
        return len(self.query_ids)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def label_count(self) -> int:
        return self.labels.shape[1]

    @property
    def group_sizes(self) -> np.ndarray:
        return np.diff(self.query_offsets)

    def group(self, q: int) -> QueryGroup:
        a, b = self.query_offsets[q], self.query_offsets[q + 1]
        return QueryGroup(self.query_ids[q], self.features[a:b], self.labels[a:b])

    @property
    def groups(self) -> List[QueryGroup]:
        return [self.group(q) for q in range(self.n_queries)]

    def select_labels(self, indices: Sequence[int]) -> "MultiLabelDataset":
        """Dataset restricted to the given label columns (features shared)."""
        indices = list(indices)
        return MultiLabelDataset(
            self.features,
            self.labels[:, indices],
            self.query_offsets,
            self.query_ids,
            [self.label_names[k] for k in indices],
            self.raw_labels[:, indices],
        )

    def select_queries(self, queries: Sequence[int]) -> "MultiLabelDataset":
        queries = list(queries)
        rows = np.concatenate(
            [np.arange(self.query_offsets[q], self.query_offsets[q + 1]) for q in queries]
        )
        sizes = self.group_sizes[queries]
        return MultiLabelDataset(
            self.features[rows],
            self.labels[rows],
            np.concatenate([[0], np.cumsum(sizes)]),
            [self.query_ids[q] for q in queries],
            self.label_names,
            self.raw_labels[rows],
        )


TextSource = Union[str, IO[str], Iterable[str]]


def _lines(source: TextSource) -> Iterable[str]:
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def parse_letor(source: TextSource, num_features: Optional[int] = None,
                label_name: str = "rel") -> MultiLabelDataset:
    """Parse LETOR text into a single-label dataset.

    ``source`` is a text stream, an iterable of lines or a string holding the
    whole file. Feature indices are 1-based; absent indices become 0.0 and the
    feature dimension is the largest index seen unless ``num_features`` is
    given. Items are grouped by qid in order of first appearance, keeping file
    order inside each group.
    """
    rows = []  # (label, qid, idx array, val array)
    max_idx = 0
    for lineno, line in enumerate(_lines(source), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 2:
            raise LetorParseError(lineno, "expected '<label> qid:<id> ...'")
        try:
            label = float(parts[0])
        except ValueError:
            raise LetorParseError(lineno, f"bad label {parts[0]!r}") from None
        if not np.isfinite(label):
            raise LetorParseError(lineno, f"non-finite label {parts[0]!r}")
        if not parts[1].startswith("qid:") or len(parts[1]) == 4:
            raise LetorParseError(lineno, f"expected qid:<id>, got {parts[1]!r}")
        qid = parts[1][4:]
        idx = np.empty(len(parts) - 2, dtype=np.int64)
        val = np.empty(len(parts) - 2, dtype=np.float64)
        for n, tok in enumerate(parts[2:]):
            key, sep, value = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                idx[n] = int(key)
                val[n] = float(value)
            except ValueError:
                raise LetorParseError(lineno, f"bad feature token {tok!r}") from None
            if idx[n] < 1:
                raise LetorParseError(lineno, f"feature index must be >= 1, got {idx[n]}")
            if n and idx[n] <= idx[n - 1]:
                raise LetorParseError(lineno, "feature indices must be strictly increasing")
        if len(idx):
            max_idx = max(max_idx, int(idx[-1]))
        rows.append((label, qid, idx, val))

    if not rows:
        raise ValueError("empty LETOR input")
    p = max_idx if num_features is None else int(num_features)
    if max_idx > p:
        raise ValueError(f"feature index {max_idx} exceeds num_features={p}")

    order: dict = {}
    for n, (_, qid, _, _) in enumerate(rows):
        order.setdefault(qid, []).append(n)
    qids = list(order)
    perm = [n for q in qids for n in order[q]]

    X = np.zeros((len(rows), p))
    y = np.empty(len(rows))
    for r, n in enumerate(perm):
        label, _, idx, val = rows[n]
        y[r] = label
        X[r, idx - 1] = val
    sizes = [len(order[q]) for q in qids]
    return MultiLabelDataset(X, y, np.concatenate([[0], np.cumsum(sizes)]), qids, [label_name])


def sample_query_ids(qids: Sequence[str], fraction: float, seed: int = 0) -> List[str]:
    """A seeded subset of ``round(fraction · n)`` queries (at least one), in input order."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    m = max(1, int(round(fraction * len(qids))))
    keep = np.sort(np.random.default_rng(seed).choice(len(qids), m, replace=False))
    return [qids[i] for i in keep]


def _qid_of(line: str) -> Optional[str]:
    parts = line.split("#", 1)[0].split(None, 2)
    if len(parts) >= 2 and parts[1].startswith("qid:"):
        return parts[1][4:]
    return None


def load_letor(path: str, num_features: Optional[int] = None, query_fraction: float = 1.0,
               seed: int = 0) -> MultiLabelDataset:
    """Parse a LETOR file, optionally keeping only a seeded fraction of its queries.

    Subsampling scans qids first and parses only the kept lines, so a 1%
    sample of a large file costs little more than reading it.
    """
    with open(path, "r", encoding="utf-8") as fh:
        if query_fraction >= 1:
            return parse_letor(fh, num_features=num_features)
        qids = list(dict.fromkeys(q for q in map(_qid_of, fh) if q is not None))
        if not qids:
            raise ValueError("empty LETOR input")
        keep = set(sample_query_ids(qids, query_fraction, seed))
        fh.seek(0)
        lines = (line for line in fh if _qid_of(line) in keep)
        return parse_letor(lines, num_features=num_features)


def write_letor(dataset: MultiLabelDataset, stream: IO[str], label_index: int = 0) -> None:
    """Write one label column in dense LETOR form (exact float round trip)."""
    for q in range(dataset.n_queries):
        a, b = dataset.query_offsets[q], dataset.query_offsets[q + 1]
        for i in range(a, b):
            label = dataset.raw_labels[i, label_index]
            head = repr(int(label)) if float(label).is_integer() else repr(float(label))
            feats = " ".join(f"{j + 1}:{float(v)!r}" for j, v in enumerate(dataset.features[i]))
            stream.write(f"{head} qid:{dataset.query_ids[q]} {feats}\n")


def quantize_label(values, n_levels: int = 5) -> np.ndarray:
    """Equal-frequency binning of a label column into ``0..n_levels-1``.

    Columns with at most ``n_levels`` distinct values are relabelled by rank
    of the distinct value, so already-ordinal labels keep their order exactly.
    """
    if n_levels < 2:
        raise ValueError("n_levels must be >= 2")
    v = np.asarray(values, dtype=np.float64)
    distinct = np.unique(v)
    if len(distinct) == 1:
        warnings.warn("constant label column quantized to level 0", RuntimeWarning, stacklevel=2)
        return np.zeros(v.shape, dtype=np.int64)
    if len(distinct) <= n_levels:
        return np.searchsorted(distinct, v).astype(np.int64)
    cuts = np.quantile(v, np.arange(1, n_levels) / n_levels)
    return np.searchsorted(cuts, v, side="right").astype(np.int64)


def promote_labels(dataset: MultiLabelDataset, spec: LabelPromotionSpec,
                   n_levels: int = 5) -> MultiLabelDataset:
    """Move feature columns into label columns and drop them from the features.

    Promoted columns are appended in spec order after the existing labels (if
    kept). Their quantized levels go to ``labels`` and the untouched values to
    ``raw_labels``.
    """
    idx = [int(i) for i in spec.promoted_feature_indices]
    p = dataset.feature_dim
    if len(set(idx)) != len(idx):
        raise ValueError("promoted feature indices must be distinct")
    for i in idx:
        if not 0 <= i < p:
            raise IndexError(f"feature index {i} out of range for p={p}")
    if not idx and not spec.keep_original_label:
        raise ValueError("promotion would leave the dataset without labels")
    names = list(spec.names) if spec.names is not None else [f"f{i}" for i in idx]
    if len(names) != len(idx):
        raise ValueError("one name per promoted column is required")

    raw_cols = dataset.features[:, idx]
    level_cols = np.column_stack([quantize_label(raw_cols[:, n], n_levels) for n in range(len(idx))]) \
        if idx else np.empty((dataset.n_items, 0))
    keep = [j for j in range(p) if j not in set(idx)]

    if spec.keep_original_label:
        labels = np.hstack([dataset.labels, level_cols])
        raw = np.hstack([dataset.raw_labels, raw_cols])
        label_names = dataset.label_names + names
    else:
        labels, raw, label_names = level_cols, raw_cols, names
    return MultiLabelDataset(
        dataset.features[:, keep],
        labels,
        dataset.query_offsets.copy(),
        list(dataset.query_ids),
        label_names,
        raw,
    )


# -- binary cache -----------------------------------------------------------

def _write_str(fh, s: str) -> None:
    b = s.encode("utf-8")
    fh.write(struct.pack("<I", len(b)))
    fh.write(b)


def _read_str(fh) -> str:
    (n,) = struct.unpack("<I", fh.read(4))
    return fh.read(n).decode("utf-8")


def save_cache(dataset: MultiLabelDataset, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<HQQQQ", CACHE_VERSION, dataset.n_items, dataset.feature_dim,
                             dataset.label_count, dataset.n_queries))
        for name in dataset.label_names:
            _write_str(fh, name)
        for qid in dataset.query_ids:
            _write_str(fh, qid)
        fh.write(dataset.query_offsets.astype("<i8").tobytes())
        for arr in (dataset.features, dataset.labels, dataset.raw_labels):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_cache(path: str) -> MultiLabelDataset:
    with open(path, "rb") as fh:
        if fh.read(len(CACHE_MAGIC)) != CACHE_MAGIC:
            raise ValueError(f"{path}: not a dataset cache file")
        version, M, p, K, m = struct.unpack("<HQQQQ", fh.read(struct.calcsize("<HQQQQ")))
        if version != CACHE_VERSION:
            raise ValueError(f"{path}: unsupported cache version {version}")
        names = [_read_str(fh) for _ in range(K)]
        qids = [_read_str(fh) for _ in range(m)]
        offsets = np.frombuffer(fh.read(8 * (m + 1)), dtype="<i8").astype(np.int64)

        def block(rows, cols):
            return np.frombuffer(fh.read(8 * rows * cols), dtype="<f8").reshape(rows, cols).copy()

        X = block(M, p)
        labels = block(M, K)
        raw = block(M, K)
    return MultiLabelDataset(X, labels, offsets, qids, names, raw)
