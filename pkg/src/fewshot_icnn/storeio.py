"""Embedding file formats: a labeled CSV and a compact binary layout.

Both formats carry (label, vector) rows.  CSV is the interchange format:
header ``label,f0,...,f{d-1}``, one row per vector, floats written with
round-trip precision.  The binary format FSE1 is magic ``FSE1``, little-endian
u32 version (=1), u32 n, u32 d, n*d little-endian float32 values row-major,
then n labels each stored as u16 byte length + UTF-8 bytes.  Readers detect
the format by the magic bytes, never by file extension.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import DataError, EmbeddingSet, EmbeddingStore, make_embedding_set

MAGIC = b"FSE1"
VERSION = 1

FORMATS = ("csv", "binary")


def _load_rows_csv(path: Path) -> tuple[np.ndarray, list[str]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataError(f"{path}: empty file")
    header = lines[0].split(",")
    d = len(header) - 1
    if header[0] != "label" or d < 1 or header[1:] != [f"f{i}" for i in range(d)]:
        raise DataError(f"{path}: line 1: malformed header "
                        f"(expected label,f0,...,f{{d-1}})")
    vectors, labels = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != d + 1:
            raise DataError(f"{path}: line {lineno}: expected {d + 1} fields, "
                            f"got {len(fields)}")
        label = fields[0]
        if not label:
            raise DataError(f"{path}: line {lineno}: empty label")
        try:
            row = [float(v) for v in fields[1:]]
        except ValueError as exc:
            raise DataError(f"{path}: line {lineno}: {exc}")
        if not all(np.isfinite(row)):
            raise DataError(f"{path}: line {lineno}: non-finite value")
        vectors.append(row)
        labels.append(label)
    if not vectors:
        raise DataError(f"{path}: no data rows")
    return np.asarray(vectors, dtype=np.float64), labels


def _read_exact(fh, count: int, path: Path, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise DataError(f"{path}: truncated file while reading {what}")
    return data


def _load_rows_binary(path: Path) -> tuple[np.ndarray, list[str]]:
    with open(path, "rb") as fh:
        head = _read_exact(fh, 16, path, "header")
        magic, version, n, d = struct.unpack("<4sIII", head)
        if magic != MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise DataError(f"{path}: unsupported version {version}")
        if n < 1 or d < 1:
            raise DataError(f"{path}: empty store (n={n}, d={d})")
        raw = _read_exact(fh, 4 * n * d, path, "vector data")
        vectors = np.frombuffer(raw, dtype="<f4").reshape(n, d).astype(np.float64)
        labels = []
        for i in range(n):
            (length,) = struct.unpack("<H", _read_exact(fh, 2, path, f"label {i}"))
            if length == 0:
                raise DataError(f"{path}: label {i} is empty")
            try:
                labels.append(_read_exact(fh, length, path, f"label {i}").decode("utf-8"))
            except UnicodeDecodeError as exc:
                raise DataError(f"{path}: label {i} is not valid UTF-8: {exc}")
    if not np.isfinite(vectors).all():
        raise DataError(f"{path}: non-finite value in vector data")
    return vectors, labels


def load_labeled_set(path) -> EmbeddingSet:
    """Read a labeled vector file in either format, preserving row order."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == MAGIC:
        vectors, labels = _load_rows_binary(path)
    else:
        vectors, labels = _load_rows_csv(path)
    return make_embedding_set(vectors, labels)


def load_store(path) -> EmbeddingStore:
    """Read an embedding store, grouping rows by label (first-appearance
    order).  Format is auto-detected by the magic bytes."""
    labeled = load_labeled_set(path)
    classes: dict[str, list[np.ndarray]] = {}
    for row, label in zip(labeled.vectors, labeled.labels):
        classes.setdefault(label, []).append(row)
    return EmbeddingStore({lab: np.stack(rows) for lab, rows in classes.items()},
                          metadata={"source": str(path)})


def save_labeled_set(vectors: np.ndarray, labels, path, format: str = "csv") -> None:
    """Write (label, vector) rows in the chosen format."""
    vectors = np.asarray(vectors, dtype=np.float64)
    labels = [str(lab) for lab in labels]
    if vectors.ndim != 2 or vectors.shape[0] != len(labels):
        raise DataError(f"{vectors.shape[0] if vectors.ndim == 2 else '?'} rows "
                        f"for {len(labels)} labels")
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {format!r}")
    for i, lab in enumerate(labels):
        if not lab:
            raise DataError(f"row {i}: empty label")
        if format == "csv" and "," in lab:
            raise DataError(f"row {i}: label {lab!r} contains a comma")
    path = Path(path)
    if format == "csv":
        n, d = vectors.shape
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("label," + ",".join(f"f{i}" for i in range(d)) + "\n")
            for lab, row in zip(labels, vectors):
                fh.write(lab + "," + ",".join(repr(float(v)) for v in row) + "\n")
        return
    n, d = vectors.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", MAGIC, VERSION, n, d))
        fh.write(np.ascontiguousarray(vectors, dtype="<f4").tobytes())
        for i, lab in enumerate(labels):
            encoded = lab.encode("utf-8")
            if not 1 <= len(encoded) <= 0xFFFF:
                raise DataError(f"row {i}: label byte length {len(encoded)} "
                                f"outside [1, 65535]")
            fh.write(struct.pack("<H", len(encoded)) + encoded)


def save_store(store: EmbeddingStore, path, format: str = "csv") -> None:
    """Write a store as class-grouped rows in insertion order."""
    flat = store.to_embedding_set()
    save_labeled_set(flat.vectors, flat.labels, path, format)
