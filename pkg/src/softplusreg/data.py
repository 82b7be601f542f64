"""Dataset ingestion, standardization, partitions and synthetic generators."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .distributions import RngStream
from .errors import DataError
from .model import ORIENTATION_ASIS, Dataset, Standardization

DATA_DIR_ENV = "SOFTPLUS_DATA_DIR"

SYNTHETIC_KINDS = ("circle", "xor", "doublemoon")


@dataclass
class RawTable:
    """Features without the bias column plus 0/1 labels."""

    features: np.ndarray
    labels: np.ndarray
    source: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        self.labels = _binary_labels(self.labels)
        if self.labels.shape != (self.features.shape[0],):
            raise DataError(
                f"{self.features.shape[0]} feature rows but {self.labels.size} labels"
            )

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def v(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "RawTable":
        idx = np.asarray(idx, dtype=np.int64)
        return RawTable(self.features[idx], self.labels[idx], self.source)


@dataclass
class PartitionSpec:
    """0-based train/test row indices for one predefined split."""

    train_idx: np.ndarray
    test_idx: np.ndarray
    id: int = 1

    def __post_init__(self):
        self.train_idx = np.asarray(self.train_idx, dtype=np.int64).reshape(-1)
        self.test_idx = np.asarray(self.test_idx, dtype=np.int64).reshape(-1)


def _binary_labels(labels) -> np.ndarray:
    lab = np.asarray(labels, dtype=float).reshape(-1)
    if not np.all(np.isfinite(lab)) or np.any(lab != np.round(lab)):
        raise DataError("labels must be integers")
    values = set(np.unique(lab).tolist())
    if values <= {0.0, 1.0}:
        return lab.astype(np.int64)
    if values <= {-1.0, 1.0}:
        return (lab > 0).astype(np.int64)
    raise DataError(f"labels must be binary (0/1 or -1/+1), found {sorted(values)}")


# ---------------------------------------------------------------------------
# sparse "label idx:val" text


def _read_sparse_rows(path):
    labels, rows = [], []
    max_idx = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                label = float(parts[0])
                entries = {}
                for tok in parts[1:]:
                    i, v = tok.split(":", 1)
                    i = int(i)
                    if i < 1:
                        raise ValueError("index must be >= 1")
                    entries[i] = float(v)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: malformed sparse line ({exc})") from None
            if entries:
                max_idx = max(max_idx, max(entries))
            labels.append(label)
            rows.append(entries)
    return labels, rows, max_idx


def parse_sparse(path, n_features: Optional[int] = None) -> RawTable:
    """Read a LIBSVM-style sparse file into a dense table.

    ``n_features`` overrides the inferred dimension (max index in the file);
    it must not be smaller than that maximum.
    """
    labels, rows, max_idx = _read_sparse_rows(path)
    v = max_idx if n_features is None else int(n_features)
    if v < max_idx:
        raise DataError(f"{path}: n_features={v} but the file uses index {max_idx}")
    x = np.zeros((len(rows), v))
    for r, entries in enumerate(rows):
        for i, val in entries.items():
            x[r, i - 1] = val
    return RawTable(x, labels, source=f"sparse:{path}")


def parse_sparse_pair(train_path, test_path):
    """Parse train and test files with a shared dimension (max over both)."""
    _, _, m1 = _read_sparse_rows(train_path)
    _, _, m2 = _read_sparse_rows(test_path)
    v = max(m1, m2)
    return parse_sparse(train_path, v), parse_sparse(test_path, v)


def write_sparse(t: RawTable, path, signed: bool = True) -> None:
    with open(path, "w") as fh:
        for row, lab in zip(t.features, t.labels):
            label = ("+1" if lab else "-1") if signed else str(int(lab))
            toks = [f"{i + 1}:{val!r}" for i, val in enumerate(row.tolist()) if val != 0.0]
            fh.write(" ".join([label, *toks]) + "\n")


# ---------------------------------------------------------------------------
# dense delimited text


def _split(line, delimiter):
    if delimiter is None:
        delimiter = "," if "," in line else None
    return [tok for tok in line.strip().split(delimiter)] if delimiter else line.split()


def _read_matrix(path, delimiter=None) -> np.ndarray:
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            toks = _split(line, delimiter)
            try:
                vals = [float(tok) for tok in toks]
            except ValueError:
                if not rows and width is None:
                    # header line
                    width = len(toks)
                    continue
                raise DataError(f"{path}:{lineno}: non-numeric value") from None
            if width is None:
                width = len(vals)
            if len(vals) != width:
                raise DataError(f"{path}:{lineno}: expected {width} columns, got {len(vals)}")
            if not all(np.isfinite(vals)):
                raise DataError(f"{path}:{lineno}: NaN or infinite value")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def parse_dense(path, labels_path=None, label_col: Optional[str] = "last",
                delimiter=None) -> RawTable:
    """Read comma- or whitespace-delimited numeric text.

    Labels come from ``labels_path`` when given, else from the first or last
    column (``label_col`` = "first" / "last").
    """
    mat = _read_matrix(path, delimiter)
    if labels_path is not None:
        labels = _read_matrix(labels_path, delimiter).reshape(-1)
        features = mat
    elif label_col == "last":
        features, labels = mat[:, :-1], mat[:, -1]
    elif label_col == "first":
        features, labels = mat[:, 1:], mat[:, 0]
    else:
        raise DataError("no labels: pass labels_path or label_col='first'/'last'")
    if labels.size != features.shape[0]:
        raise DataError(f"{features.shape[0]} feature rows but {labels.size} labels")
    return RawTable(features, labels, source=f"dense:{path}")


def write_dense(t: RawTable, features_path, labels_path) -> None:
    Path(features_path).parent.mkdir(parents=True, exist_ok=True)
    with open(features_path, "w") as fh:
        fh.write(",".join(f"x{j + 1}" for j in range(t.v)) + "\n")
        for row in t.features:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    with open(labels_path, "w") as fh:
        fh.write("y\n")
        for lab in t.labels:
            fh.write(f"{int(lab)}\n")


# ---------------------------------------------------------------------------


def standardize(t: RawTable, fit_idx):
    """Z-score every feature with mean/std (population) of the ``fit_idx`` rows.

    Constant features are left untouched and recorded with mean 0, std 1.
    """
    fit_idx = np.asarray(fit_idx, dtype=np.int64)
    if fit_idx.size == 0:
        raise DataError("standardization needs at least one fitting row")
    sub = t.features[fit_idx]
    mean = sub.mean(axis=0)
    std = sub.std(axis=0)
    const = ~(std > 0)
    mean = np.where(const, 0.0, mean)
    std = np.where(const, 1.0, std)
    params = Standardization(mean, std)
    return RawTable(params.apply(t.features), t.labels, t.source), params


def to_dataset(t: RawTable, standardization: Optional[Standardization] = None,
               orientation: int = ORIENTATION_ASIS) -> Dataset:
    return Dataset.from_features(t.features, t.labels, standardization, orientation)


def load_partition(t: RawTable, spec: PartitionSpec, standardize_features: bool = True):
    """Build train/test datasets for one split; scaling is fit on train only."""
    tr, te = spec.train_idx, spec.test_idx
    for name, idx in (("train", tr), ("test", te)):
        if idx.size and (idx.min() < 0 or idx.max() >= t.n):
            raise DataError(f"{name} index out of range for {t.n} rows")
    if np.intersect1d(tr, te).size:
        raise DataError("train and test partitions overlap")
    if tr.size == 0:
        raise DataError("empty training partition")
    params = None
    if standardize_features:
        _, params = standardize(t, tr)
    train = to_dataset(t.subset(tr), params)
    test = to_dataset(t.subset(te), params)
    return train, test


def flip_labels(d: Dataset) -> Dataset:
    """Swap the class coding and toggle the orientation flag."""
    return Dataset(d.x.copy(), 1 - d.y, d.standardization, 1 - d.orientation)


def read_partitions(path, n_rows: int, test_path=None) -> list:
    """One partition per line listing 1-based training indices.

    The test set is the complement unless ``test_path`` supplies matching
    lines of 1-based test indices.
    """
    def _lines(p):
        out = []
        with open(p) as fh:
            for lineno, line in enumerate(fh, 1):
                toks = [tok for tok in re.split(r"[,\s]+", line.strip()) if tok]
                if not toks:
                    continue
                try:
                    out.append(np.array([int(float(tok)) for tok in toks]) - 1)
                except ValueError:
                    raise DataError(f"{p}:{lineno}: non-integer index") from None
        return out

    trains = _lines(path)
    tests = _lines(test_path) if test_path is not None else None
    if tests is not None and len(tests) != len(trains):
        raise DataError("train and test partition files differ in length")
    specs = []
    for i, tr in enumerate(trains):
        te = tests[i] if tests is not None else np.setdiff1d(np.arange(n_rows), tr)
        specs.append(PartitionSpec(tr, te, id=i + 1))
    return specs


def default_data_dir() -> Optional[Path]:
    val = os.environ.get(DATA_DIR_ENV)
    return Path(val) if val else None


# ---------------------------------------------------------------------------
# synthetic data


def generate_synthetic(kind: str, seed: int = 0) -> RawTable:
    """Two-class toy data; class A is labeled 1 and class B 0.

    * circle: 150 A points on a noisy ring (radius ~ N(2, 0.5^2), uniform
      angle) and 150 B points with both coordinates ~ N(0, 0.5^2).
    * xor: four blobs of 50 unit-variance points; A around (-2, 2), (2, -2),
      B around (2, 2), (-2, -2).
    * doublemoon: 250 points per class on two interleaved half-annuli of
      radius 2 and width 1; the lower moon is centred at (2, 0.5), i.e.
      shifted right by 2 and overlapping vertically by 0.5.
    """
    gen = RngStream(seed, 0).generator
    if kind == "circle":
        radius = gen.normal(2.0, 0.5, 150)
        angle = gen.uniform(0.0, 2.0 * np.pi, 150)
        a = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
        b = gen.normal(0.0, 0.5, (150, 2))
    elif kind == "xor":
        a = np.vstack([gen.normal((-2.0, 2.0), 1.0, (50, 2)), gen.normal((2.0, -2.0), 1.0, (50, 2))])
        b = np.vstack([gen.normal((2.0, 2.0), 1.0, (50, 2)), gen.normal((-2.0, -2.0), 1.0, (50, 2))])
    elif kind == "doublemoon":
        radius, width, dx, dy = 2.0, 1.0, 2.0, -0.5

        def moon(n):
            rho = gen.uniform(radius - width / 2, radius + width / 2, n)
            phi = gen.uniform(0.0, np.pi, n)
            return rho * np.cos(phi), rho * np.sin(phi)

        ax, ay = moon(250)
        bx, by = moon(250)
        a = np.column_stack([ax, ay])
        b = np.column_stack([bx + dx, -by - dy])
    else:
        raise DataError(f"unknown synthetic kind {kind!r}; choose from {SYNTHETIC_KINDS}")
    features = np.vstack([a, b])
    labels = np.concatenate([np.ones(len(a), dtype=np.int64), np.zeros(len(b), dtype=np.int64)])
    return RawTable(features, labels, source=f"synthetic:{kind}:{seed}")


# ---------------------------------------------------------------------------
# predefined benchmark splits


def _find(base: Path, names):
    for name in names:
        p = base / name
        if p.exists():
            return p
    return None


def load_benchmark(name: str, split: int, data_dir=None):
    """Load split ``split`` (1-based) of a benchmark as ``(table, PartitionSpec)``.

    Two layouts are recognised under ``data_dir`` or ``data_dir/name``:

    * per-split text files ``{name}_train_data_{i}.asc``,
      ``{name}_train_labels_{i}.asc``, ``{name}_test_data_{i}.asc`` and
      ``{name}_test_labels_{i}.asc``;
    * one dense table ``features.csv`` + ``labels.csv`` with
      ``partitions.txt`` (1-based training indices per line) and optionally
      ``test_partitions.txt``.
    """
    data_dir = Path(data_dir) if data_dir is not None else default_data_dir()
    if data_dir is None:
        raise DataError(f"no data directory: pass one or set {DATA_DIR_ENV}")
    for base in (data_dir / name, data_dir):
        tr = _find(base, [f"{name}_train_data_{split}.asc"])
        if tr is not None:
            files = {
                kind: base / f"{name}_{kind}_{split}.asc"
                for kind in ("train_data", "train_labels", "test_data", "test_labels")
            }
            missing = [str(p) for p in files.values() if not p.exists()]
            if missing:
                raise DataError(f"incomplete split files: {', '.join(missing)}")
            train = parse_dense(files["train_data"], files["train_labels"])
            test = parse_dense(files["test_data"], files["test_labels"])
            if train.v != test.v:
                raise DataError("train and test files differ in feature count")
            table = RawTable(
                np.vstack([train.features, test.features]),
                np.concatenate([train.labels, test.labels]),
                source=f"benchmark:{name}:{split}",
            )
            spec = PartitionSpec(np.arange(train.n), np.arange(train.n, table.n), id=split)
            return table, spec
        feats = _find(base, ["features.csv"]) if base.name == name else None
        if feats is not None:
            table = parse_dense(feats, base / "labels.csv")
            parts = read_partitions(base / "partitions.txt", table.n,
                                    _find(base, ["test_partitions.txt"]))
            if not 1 <= split <= len(parts):
                raise DataError(f"{name}: split {split} outside 1..{len(parts)}")
            return table, parts[split - 1]
    raise DataError(f"benchmark {name!r} split {split} not found under {data_dir}")
