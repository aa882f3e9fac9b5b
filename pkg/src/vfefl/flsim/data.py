"""IDX parsing, synthetic toy data and federated partitioning."""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import BadMagic, DatasetError, TruncatedFile

DATA_ENV = "VFEFL_DATA"

_IDX_DTYPES = {
    0x08: np.uint8,
    0x09: np.int8,
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def _open(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx(path) -> np.ndarray:
    """Parse one IDX file (optionally gzipped) into an array of its native dtype."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    with _open(path) as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise TruncatedFile(f"{path}: shorter than the IDX header")
    zero, dtype_code, ndim = struct.unpack(">HBB", raw[:4])
    if zero != 0 or dtype_code not in _IDX_DTYPES:
        raise BadMagic(f"{path}: bad IDX magic {raw[:4].hex()}")
    head = 4 + 4 * ndim
    if len(raw) < head:
        raise TruncatedFile(f"{path}: truncated dimension header")
    dims = struct.unpack(f">{ndim}I", raw[4:head])
    dtype = np.dtype(_IDX_DTYPES[dtype_code])
    need = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(raw) - head < need:
        raise TruncatedFile(f"{path}: expected {need} payload bytes, found {len(raw) - head}")
    return np.frombuffer(raw, dtype=dtype, count=need // dtype.itemsize, offset=head).reshape(dims)


def write_idx(path, array: np.ndarray) -> None:
    codes = {np.dtype(v).str.lstrip("<>|="): k for k, v in _IDX_DTYPES.items()}
    arr = np.asarray(array)
    key = arr.dtype.str.lstrip("<>|=")
    if key not in codes:
        raise DatasetError(f"dtype {arr.dtype} has no IDX code")
    code = codes[key]
    big = arr.astype(np.dtype(_IDX_DTYPES[code]), copy=False)
    header = struct.pack(">HBB", 0, code, arr.ndim) + struct.pack(f">{arr.ndim}I", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header + big.tobytes())


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    classes: int

    def __len__(self):
        return len(self.y)

    def take(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.classes)

    def subset(self, k: int, seed: int = 0) -> "Dataset":
        if k > len(self):
            raise DatasetError(f"subset of {k} from {len(self)} samples")
        idx = np.random.default_rng(seed).permutation(len(self))[:k]
        return self.take(np.sort(idx))

    def flatten(self) -> "Dataset":
        return Dataset(self.X.reshape(len(self), -1), self.y, self.classes)


def load_idx(images, labels=None, classes: int | None = None) -> Dataset:
    """Load an IDX image file (and optional label file) with pixels scaled to [0, 1]."""
    X = read_idx(images)
    X = X.astype(np.float64) / 255.0 if X.dtype == np.uint8 else X.astype(np.float64)
    if labels is None:
        y = np.zeros(len(X), dtype=np.int64)
    else:
        y = read_idx(labels).astype(np.int64)
        if len(y) != len(X):
            raise DatasetError(f"{len(X)} images but {len(y)} labels")
    return Dataset(X, y, classes or int(y.max()) + 1)


def data_root(path=None) -> Path:
    root = path or os.environ.get(DATA_ENV)
    if not root:
        raise DatasetError(f"no dataset directory given and ${DATA_ENV} is unset")
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset directory not found: {root}")
    return root


def _find(root: Path, stem: str) -> Path:
    for cand in (root / stem, root / f"{stem}.gz"):
        if cand.exists():
            return cand
    raise DatasetError(f"{stem} not found under {root}")


def load_mnist(root=None) -> tuple[Dataset, Dataset | None]:
    """Training set and (when present) test set from a directory of MNIST-style IDX files."""
    root = data_root(root)
    train = load_idx(_find(root, MNIST_FILES["train_images"]), _find(root, MNIST_FILES["train_labels"]), 10)
    try:
        test = load_idx(_find(root, MNIST_FILES["test_images"]), _find(root, MNIST_FILES["test_labels"]), 10)
    except DatasetError:
        test = None
    return train, test


def avg_pool(X: np.ndarray, k: int) -> np.ndarray:
    """Average-pool a batch of square images by ``k`` (shrinks the model dimension)."""
    if k <= 1:
        return X
    n, h, w = X.shape
    h2, w2 = h // k, w // k
    return X[:, : h2 * k, : w2 * k].reshape(n, h2, k, w2, k).mean(axis=(2, 4))


def make_blobs(n: int, features: int, classes: int, seed: int, spread: float = 1.0) -> Dataset:
    """Gaussian clusters around random unit-scale centres; an easy linear task."""
    rng = np.random.default_rng(seed)
    centres = rng.normal(0.0, 2.0, size=(classes, features))
    y = rng.integers(0, classes, size=n)
    X = centres[y] + rng.normal(0.0, spread, size=(n, features))
    return Dataset(X, y.astype(np.int64), classes)


@dataclass(frozen=True)
class FederatedData:
    shards: tuple[Dataset, ...]
    root: Dataset
    test: Dataset
    classes: int


def partition(
    pool: Dataset,
    n_clients: int,
    n_train: int,
    n_root: int,
    test: Dataset | None = None,
    n_test: int = 0,
    seed: int = 0,
) -> FederatedData:
    """IID split into disjoint client shards, a root set and a test set."""
    pool = pool.flatten()
    need = n_train + n_root + (0 if test is not None else n_test)
    if need > len(pool):
        raise DatasetError(f"need {need} samples, pool has {len(pool)}")
    idx = np.random.default_rng(seed).permutation(len(pool))
    train_idx = idx[:n_train]
    root = pool.take(idx[n_train : n_train + n_root])
    if test is None:
        test = pool.take(idx[n_train + n_root : need])
    else:
        test = test.flatten()
        if n_test:
            test = test.subset(min(n_test, len(test)), seed)
    shards = tuple(pool.take(part) for part in np.array_split(train_idx, n_clients))
    return FederatedData(shards, root, test, pool.classes)


def flip_labels(ds: Dataset) -> Dataset:
    return Dataset(ds.X, ds.classes - 1 - ds.y, ds.classes)
