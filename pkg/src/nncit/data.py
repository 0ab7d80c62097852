"""Sample storage, deterministic randomness, splitting, and CSV ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "SplitPair",
    "IngestionError",
    "make_rng",
    "derive_seed",
    "load_csv",
    "write_csv",
    "split",
    "subsample",
]

# Stream tag reserved by this module; other modules use distinct tags so the
# same user seed never feeds two different purposes with identical bits.
_SPLIT_STREAM = 10


class IngestionError(ValueError):
    """Raised when a CSV file cannot be parsed into a Dataset."""


def make_rng(seed: int, stream=()) -> np.random.Generator:
    """Deterministic counter-based generator for a (seed, stream) pair.

    The same (seed, stream) always reproduces the same draw sequence, and
    distinct streams are statistically independent, so concurrent tasks can
    each own a private stream and the combined output does not depend on
    scheduling order.
    """
    if isinstance(stream, (int, np.integer)):
        stream = (stream,)
    key = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(key))


def derive_seed(seed: int, *stream: int) -> int:
    """Collapse a (seed, stream) pair into a fresh 64-bit integer seed."""
    key = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return int(key.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class Dataset:
    """Immutable columnar store of (x, y, z) samples.

    x and y are scalar per row; z holds the conditioning vector, one row
    per sample.  Arrays are float64, C-contiguous and write-locked, so a
    Dataset can be shared freely between concurrent tasks.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        z = np.ascontiguousarray(self.z, dtype=np.float64)
        if x.ndim != 1 or y.ndim != 1:
            raise ValueError("x and y must be one-dimensional")
        if z.ndim != 2:
            raise ValueError("z must be two-dimensional (one row per sample)")
        if not (x.shape[0] == y.shape[0] == z.shape[0]):
            raise ValueError(
                f"row counts differ: x has {x.shape[0]}, y has {y.shape[0]}, "
                f"z has {z.shape[0]}"
            )
        if x.shape[0] == 0:
            raise ValueError("a Dataset needs at least one sample")
        if z.shape[1] == 0:
            raise ValueError("z needs at least one column")
        for name, arr in (("x", x), ("y", y), ("z", z)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite values in {name}")
        for arr in (x, y, z):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d_z(self) -> int:
        return self.z.shape[1]

    def take(self, indices) -> "Dataset":
        """Row subset (copy) in the given index order."""
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(x=self.x[idx], y=self.y[idx], z=self.z[idx])

    def with_x(self, x) -> "Dataset":
        """Copy with the x column replaced, y and z unchanged."""
        return Dataset(x=np.asarray(x, dtype=np.float64), y=self.y, z=self.z)


@dataclass(frozen=True)
class SplitPair:
    """Disjoint folds produced by split(); together they cover the input."""

    u1: Dataset
    u2: Dataset
    seed: int


def load_csv(path) -> Dataset:
    """Read a Dataset from a CSV file with header x,y,z1,...,zd.

    Raises IngestionError naming the offending line and column on any
    malformed header, field count mismatch, or non-numeric value.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [cell.strip() for cell in next(reader)]
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        d = len(header) - 2
        expected = ["x", "y"] + [f"z{j}" for j in range(1, d + 1)]
        if d < 1 or header != expected:
            raise IngestionError(
                f"{path}: header must be x,y,z1,...,zd; got {','.join(header)}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise IngestionError(
                    f"{path}: line {lineno}: expected {len(header)} fields, "
                    f"got {len(row)}"
                )
            values = []
            for name, cell in zip(header, row):
                try:
                    value = float(cell)
                except ValueError:
                    raise IngestionError(
                        f"{path}: line {lineno}, column {name}: "
                        f"not a number: {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise IngestionError(
                        f"{path}: line {lineno}, column {name}: "
                        f"non-finite value {cell!r}"
                    )
                values.append(value)
            rows.append(values)
        if not rows:
            raise IngestionError(f"{path}: no data rows")
    table = np.asarray(rows, dtype=np.float64)
    return Dataset(x=table[:, 0], y=table[:, 1], z=table[:, 2:])


def write_csv(data: Dataset, path) -> None:
    """Write a Dataset in the x,y,z1,...,zd format accepted by load_csv."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"] + [f"z{j}" for j in range(1, data.d_z + 1)])
        for i in range(data.n):
            writer.writerow(
                [repr(float(data.x[i])), repr(float(data.y[i]))]
                + [repr(float(v)) for v in data.z[i]]
            )


def split(data: Dataset, seed: int) -> SplitPair:
    """Randomly partition into disjoint folds of sizes n - n//3 and n//3.

    Fold membership depends only on (data.n, seed).  Rows keep their
    original relative order inside each fold.
    """
    if data.n < 6:
        raise ValueError(f"need at least 6 samples to split, got {data.n}")
    rng = make_rng(seed, (_SPLIT_STREAM,))
    perm = rng.permutation(data.n)
    n2 = data.n // 3
    idx2 = np.sort(perm[:n2])
    idx1 = np.sort(perm[n2:])
    return SplitPair(u1=data.take(idx1), u2=data.take(idx2), seed=int(seed))


def subsample(data: Dataset, m: int, rng: np.random.Generator) -> Dataset:
    """Uniform subsample of m rows without replacement."""
    m = int(m)
    if not 1 <= m <= data.n:
        raise ValueError(f"subsample size {m} outside [1, {data.n}]")
    idx = rng.choice(data.n, size=m, replace=False)
    return data.take(idx)
