"""Synthetic generators, CSV ingestion, splitting and standardization.

A :class:`Dataset` stores samples as the columns of ``x`` (``D x N``).
"""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    BadConfigError,
    CenterPlacementFailure,
    DimMismatchError,
    EmptyFileError,
    ParseError,
    RaggedRowError,
    TooSmallError,
)
from .numerics import gaussian_matrix, thin_qr

STD_FLOOR = 1e-8
MAX_CENTER_TRIES = 10_000


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray | None = None
    feature_names: list | None = None
    image_shape: tuple | None = None
    label_map: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.x.ndim != 2:
            raise DimMismatchError(f"x must be D x N, got shape {self.x.shape}")
        if self.y is not None:
            self.y = np.asarray(self.y)
            if self.y.shape[0] != self.n:
                raise DimMismatchError(f"{self.y.shape[0]} labels for {self.n} samples")
        if self.image_shape is not None:
            self.image_shape = tuple(int(s) for s in self.image_shape)
            if int(np.prod(self.image_shape)) != self.d:
                raise DimMismatchError(
                    f"image shape {self.image_shape} does not match D={self.d}")

    @property
    def d(self):
        return self.x.shape[0]

    @property
    def n(self):
        return self.x.shape[1]

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        y = None if self.y is None else self.y[idx]
        return replace(self, x=self.x[:, idx], y=y)

    def samples(self):
        """Batch-major view: ``(N, D)`` or ``(N, C, H, W)`` for images."""
        xt = self.x.T
        if self.image_shape is not None:
            return xt.reshape((self.n,) + self.image_shape)
        return xt


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple = (0.70, 0.15, 0.15)
    seed: int = 0
    stratify: bool = False

    def __post_init__(self):
        f = tuple(float(v) for v in self.fractions)
        if len(f) != 3 or any(v <= 0 for v in f) or abs(sum(f) - 1.0) > 1e-9:
            raise BadConfigError(f"fractions must be three positives summing to 1, got {f}")
        object.__setattr__(self, "fractions", f)


# -- generators -----------------------------------------------------------

def make_blobs(rng, k, dim, n_per_class, spread=1.0, distractor_dims=0,
               distractor_std=1.0, center_box=5.0):
    """Gaussian clusters plus pure-noise distractor features.

    Centers are uniform in ``[-center_box, center_box]^dim`` and redrawn
    until every pair is at least ``4 * spread`` apart. Samples are ordered
    class by class; distractors are appended as the last rows.
    """
    if k < 2 or dim < 1 or n_per_class < 1:
        raise BadConfigError("need k >= 2, dim >= 1 and n_per_class >= 1")
    if spread < 0 or distractor_dims < 0 or distractor_std < 0:
        raise BadConfigError("spread and distractor settings must be non-negative")
    min_dist = 4.0 * spread
    for _ in range(MAX_CENTER_TRIES):
        centers = rng.uniform(-center_box, center_box, size=(k, dim))
        gaps = np.linalg.norm(centers[:, None] - centers[None], axis=-1)
        if gaps[np.triu_indices(k, 1)].min() >= min_dist:
            break
    else:
        raise CenterPlacementFailure(
            f"could not place {k} centers {min_dist} apart in {MAX_CENTER_TRIES} tries")
    blocks = [centers[c][:, None] + gaussian_matrix(rng, dim, n_per_class, 0.0, spread)
              for c in range(k)]
    x = np.concatenate(blocks, axis=1)
    if distractor_dims:
        noise = gaussian_matrix(rng, distractor_dims, x.shape[1], 0.0, distractor_std)
        x = np.vstack([x, noise])
    y = np.repeat(np.arange(k), n_per_class)
    return Dataset(x, y)


def make_lowrank(rng, d, n, rank, noise_std):
    """``x = B C + noise`` with a random orthonormal ``d x rank`` basis ``B``.

    Returns ``(dataset, B)``.
    """
    if not 1 <= rank <= min(d, n):
        raise BadConfigError(f"rank={rank} must lie in [1, min(d, n)={min(d, n)}]")
    if noise_std < 0:
        raise BadConfigError("noise_std must be non-negative")
    basis, _ = thin_qr(gaussian_matrix(rng, d, rank))
    coeffs = gaussian_matrix(rng, rank, n)
    x = basis @ coeffs + gaussian_matrix(rng, d, n, 0.0, noise_std)
    return Dataset(x), basis


def make_bars(rng, size, n_per_class, noise=0.1):
    """Binary bar images: class 0 horizontal, class 1 vertical.

    Each image has one full-length bar at a random position plus uniform
    pixel noise in ``[-noise, noise]``.
    """
    if size < 4 or n_per_class < 1:
        raise BadConfigError("need size >= 4 and n_per_class >= 1")
    n = 2 * n_per_class
    imgs = np.zeros((n, 1, size, size))
    pos = rng.integers(0, size, size=n)
    for i in range(n):
        if i < n_per_class:
            imgs[i, 0, pos[i], :] = 1.0
        else:
            imgs[i, 0, :, pos[i]] = 1.0
    imgs += rng.uniform(-noise, noise, size=imgs.shape)
    y = np.repeat(np.arange(2), n_per_class)
    return Dataset(imgs.reshape(n, -1).T, y, image_shape=(1, size, size))


# -- splitting ------------------------------------------------------------

def split_sizes(n, fractions):
    n_train = int(np.floor(fractions[0] * n))
    n_val = int(np.floor(fractions[1] * n))
    return n_train, n_val, n - n_train - n_val


def split(dataset, spec=SplitSpec()):
    """Seeded train/validation/test split (disjoint and exhaustive)."""
    n = dataset.n
    sizes = split_sizes(n, spec.fractions)
    if min(sizes) < 1:
        raise TooSmallError(f"{n} samples give empty split(s) {sizes}")
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    if spec.stratify and dataset.y is not None:
        parts = [[], [], []]
        for cls in np.unique(dataset.y):
            idx = rng.permutation(np.flatnonzero(dataset.y == cls))
            a, b, _ = split_sizes(idx.size, spec.fractions)
            parts[0].append(idx[:a])
            parts[1].append(idx[a:a + b])
            parts[2].append(idx[a + b:])
        idx_sets = [np.sort(np.concatenate(p)) for p in parts]
        if min(s.size for s in idx_sets) < 1:
            raise TooSmallError("stratified split left an empty part")
    else:
        perm = rng.permutation(n)
        a, b, _ = sizes
        idx_sets = [perm[:a], perm[a:a + b], perm[a + b:]]
    return tuple(dataset.subset(i) for i in idx_sets)


# -- standardization ------------------------------------------------------

@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray


def standardize_fit(data):
    """Per-feature mean and (floored) population std of a dataset or matrix."""
    x = data.x if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    return Standardizer(x.mean(axis=1), np.maximum(x.std(axis=1), STD_FLOOR))


def standardize_apply(stats, data):
    x = data.x if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if x.shape[0] != stats.mean.shape[0]:
        raise DimMismatchError(f"expected {stats.mean.shape[0]} features, got {x.shape[0]}")
    z = (x - stats.mean[:, None]) / stats.std[:, None]
    return replace(data, x=z) if isinstance(data, Dataset) else z


# -- CSV ------------------------------------------------------------------

def factorize(values):
    """Integer codes in first-appearance order and the value -> code map."""
    mapping = {}
    codes = np.empty(len(values), dtype=np.int64)
    for i, v in enumerate(values):
        codes[i] = mapping.setdefault(v, len(mapping))
    return codes, mapping


def load_csv(path, label_column="label", regression=False):
    """Read a header-first numeric CSV into a ``D x N`` dataset.

    Labels are factorized in order of first appearance, except that a
    column of non-negative integer literals is kept as-is. With
    ``regression`` set labels are parsed as floats.
    ``label_column=None`` reads features only.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or not any(rows):
        raise EmptyFileError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if label_column is not None and label_column not in header:
        raise ParseError(1, label_column, "label column not in header")
    lab_idx = header.index(label_column) if label_column is not None else None
    feat_idx = [i for i in range(len(header)) if i != lab_idx]
    feats, labels = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise RaggedRowError(f"line {lineno}: {len(row)} fields, header has {len(header)}")
        vals = []
        for i in feat_idx:
            try:
                vals.append(float(row[i]))
            except ValueError:
                raise ParseError(lineno, header[i]) from None
        feats.append(vals)
        if lab_idx is not None:
            cell = row[lab_idx].strip()
            if regression:
                try:
                    labels.append(float(cell))
                except ValueError:
                    raise ParseError(lineno, label_column) from None
            else:
                labels.append(cell)
    if not feats:
        raise EmptyFileError(f"{path} has a header but no data rows")
    x = np.array(feats, dtype=np.float64).T
    if lab_idx is None:
        return Dataset(x, feature_names=[header[i] for i in feat_idx])
    if regression:
        return Dataset(x, np.array(labels), feature_names=[header[i] for i in feat_idx])
    if all(lab.isdigit() for lab in labels):
        codes = np.array([int(lab) for lab in labels], dtype=np.int64)
        mapping = {str(c): int(c) for c in np.unique(codes)}
    else:
        codes, mapping = factorize(labels)
    return Dataset(x, codes, feature_names=[header[i] for i in feat_idx], label_map=mapping)


def save_csv(dataset, path, label_column="label"):
    """Write ``dataset`` as CSV with 17 significant digits (exact on re-read)."""
    names = dataset.feature_names or [f"f{i}" for i in range(dataset.d)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(names) + ([label_column] if dataset.y is not None else []))
        for j in range(dataset.n):
            row = [repr(float(v)) for v in dataset.x[:, j]]
            if dataset.y is not None:
                row.append(str(dataset.y[j]))
            w.writerow(row)
