"""Array container I/O, labeled feature sets and max-norm normalization.

Arrays are exchanged as NPY v1.0 files restricted to five little-endian
dtypes so that feature matrices produced elsewhere (for example network
embeddings) can be loaded bit-for-bit.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateInputError,
    EmptyInputError,
    FormatError,
    ShapeError,
    TruncationError,
    UnsupportedDtypeError,
)

MAGIC = b"\x93NUMPY"
VERSION = b"\x01\x00"
SUPPORTED_DESCR = ("<f4", "<f8", "|u1", "<u2", "<i4")

NORM_TOL = 1e-12


def _descr(dtype: np.dtype) -> str:
    dt = np.dtype(dtype)
    if dt.itemsize > 1:
        dt = dt.newbyteorder("<")
    return dt.str


def load_array(path) -> np.ndarray:
    """Read an NPY v1.0 file into a C-ordered native-endian array.

    Raises FormatError on a bad magic string or version, UnsupportedDtypeError
    for dtypes outside the supported set and TruncationError when the payload
    is shorter than the header promises.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 10 or raw[:6] != MAGIC:
        raise FormatError(f"{path}: not an NPY file (bad magic)")
    if raw[6:8] != VERSION:
        raise FormatError(f"{path}: unsupported NPY version {raw[6]}.{raw[7]}")

    buf = io.BytesIO(raw)
    buf.seek(8)
    try:
        shape, fortran_order, dtype = np.lib.format.read_array_header_1_0(buf)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed header ({exc})") from None
    if dtype.str not in SUPPORTED_DESCR:
        raise UnsupportedDtypeError(f"{path}: unsupported dtype {dtype.str!r}")

    offset = buf.tell()
    count = int(np.prod(shape, dtype=np.int64))
    need = count * dtype.itemsize
    have = len(raw) - offset
    if have < need:
        raise TruncationError(
            f"{path}: header declares {need} data bytes, file holds {have}"
        )
    if have > need:
        raise FormatError(f"{path}: {have - need} trailing bytes after data")

    data = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    if fortran_order:
        arr = data.reshape(shape[::-1]).transpose()
    else:
        arr = data.reshape(shape)
    return np.array(arr, dtype=dtype.newbyteorder("="), order="C")


def save_array(t, path) -> None:
    """Write ``t`` as a C-ordered little-endian NPY v1.0 file."""
    arr = np.asarray(t)
    descr = _descr(arr.dtype)
    if descr not in SUPPORTED_DESCR:
        raise UnsupportedDtypeError(f"unsupported dtype {arr.dtype.str!r}")
    arr = np.asarray(arr, dtype=np.dtype(descr), order="C")
    header = {"descr": descr, "fortran_order": False, "shape": arr.shape}
    with open(path, "wb") as fh:
        # writes magic + version 1.0 + header padded to 64-byte alignment
        np.lib.format.write_array_header_1_0(fh, header)
        fh.write(arr.tobytes(order="C"))


def _remap(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    class_ids, contiguous = np.unique(labels, return_inverse=True)
    return class_ids, contiguous.astype(np.int64).reshape(-1)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FeatureSet:
    """Labeled feature vectors.

    ``labels`` holds contiguous ids in ``[0, m)``; ``class_ids[j]`` is the
    original label value of class ``j``.
    """

    features: np.ndarray
    labels: np.ndarray
    class_ids: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ShapeError(
                f"labels of shape {y.shape} do not match {X.shape[0]} feature rows"
            )
        if X.shape[0] == 0:
            raise EmptyInputError("feature set has no rows")
        ids = np.asarray(self.class_ids)
        m = ids.shape[0]
        if y.min() < 0 or y.max() >= m or np.bincount(y, minlength=m).min() == 0:
            raise ShapeError("labels must cover every class id in [0, m)")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y.astype(np.int64)))
        object.__setattr__(self, "class_ids", _frozen(ids))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def m(self) -> int:
        return self.class_ids.shape[0]

    def original_labels(self) -> np.ndarray:
        return self.class_ids[self.labels]

    def rows(self, j: int) -> np.ndarray:
        """Feature rows of contiguous class ``j``."""
        return self.features[self.labels == j]


@dataclass(frozen=True)
class LabeledCube:
    """An H x W x B reflectance cube with an H x W ground-truth map (0 = unlabeled)."""

    cube: np.ndarray
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        cube = np.asarray(self.cube)
        gt = np.asarray(self.labels)
        if cube.ndim != 3:
            raise ShapeError(f"cube must be H x W x B, got shape {cube.shape}")
        if gt.shape != cube.shape[:2]:
            raise ShapeError(
                f"label map {gt.shape} does not match cube spatial dims {cube.shape[:2]}"
            )
        if not np.issubdtype(gt.dtype, np.integer):
            if not np.all(gt == np.round(gt)):
                raise ShapeError("label map must hold integers")
            gt = gt.astype(np.int64)
        if gt.min() < 0:
            raise ShapeError("label map holds negative values")
        if not np.any(gt != 0):
            raise EmptyInputError("no labeled pixels")
        object.__setattr__(self, "cube", _frozen(cube))
        object.__setattr__(self, "labels", _frozen(gt))

    def labeled_pixels(self) -> tuple[np.ndarray, np.ndarray]:
        """Row/column indices of labeled pixels in row-major scan order."""
        return np.nonzero(self.labels)


def flatten_labeled_pixels(c: LabeledCube) -> FeatureSet:
    """Raw spectra of every labeled pixel, one row per pixel in scan order."""
    rr, cc = c.labeled_pixels()
    X = c.cube[rr, cc, :].astype(np.float64)
    class_ids, y = _remap(c.labels[rr, cc])
    return FeatureSet(X, y, class_ids, normalized=False)


def assemble_feature_set(features, labels) -> FeatureSet:
    """Build a FeatureSet from an n x p matrix and n integer labels."""
    X = np.asarray(features)
    y = np.asarray(labels)
    if X.ndim != 2:
        raise ShapeError(f"features must be 2-D, got shape {X.shape}")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ShapeError(
            f"{y.shape[0] if y.ndim else 0} labels for {X.shape[0]} feature rows"
        )
    if y.size == 0:
        raise EmptyInputError("feature set has no rows")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(y == np.round(y)):
            raise ShapeError("labels must be integers")
        y = y.astype(np.int64)
    if y.min() < 0:
        raise ShapeError("labels must be non-negative")
    class_ids, contiguous = _remap(y)
    return FeatureSet(X.astype(np.float64), contiguous, class_ids, normalized=False)


def max_row_norm(X) -> float:
    return float(np.max(np.linalg.norm(X, axis=1)))


def normalize_max_norm(fs: FeatureSet) -> FeatureSet:
    """Divide every feature vector by the largest Euclidean norm in the set."""
    M = max_row_norm(fs.features)
    if not M > 0:
        raise DegenerateInputError("all feature vectors are zero; cannot normalize")
    return FeatureSet(fs.features / M, fs.labels, fs.class_ids, normalized=True)


def is_normalized(fs: FeatureSet, tol: float = NORM_TOL) -> bool:
    return abs(max_row_norm(fs.features) - 1.0) <= tol
