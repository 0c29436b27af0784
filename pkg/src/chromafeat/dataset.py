"""Sparse labeled datasets: libsvm parsing, splits, dense/sparse separation.

An example is a binary label plus a strictly increasing tuple of active
feature ids; sparse feature values collapse to presence.  Dense feature
values (features active on more than a configured share of rows) are kept in
a side vector and pass through every encoder unchanged.
"""

from __future__ import annotations

import gzip
import io
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .hashing import feature_id_from_string, hash_bytes

_CACHE_MAGIC = b"CFDS0001"


class DatasetError(ValueError):
    pass


class LibsvmParseError(DatasetError):
    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True, slots=True)
class Example:
    """One labeled row: binary label, sorted active ids, dense values."""

    label: int
    active: tuple[int, ...]
    dense: tuple[float, ...] = ()


@dataclass
class SparseDataset:
    """An ordered collection of examples plus per-feature frequencies.

    ``feature_freq`` preserves first-seen order (dict insertion order), which
    downstream coloring uses as the default "data order".
    """

    examples: list[Example]
    eta: int
    feature_freq: dict[int, int]
    dense_ids: tuple[int, ...] = ()

    @property
    def n(self) -> int:
        return len(self.examples)

    @property
    def n_dense(self) -> int:
        return len(self.dense_ids)

    @classmethod
    def from_examples(cls, examples: Iterable[Example], dense_ids: Sequence[int] = ()) -> "SparseDataset":
        examples = list(examples)
        eta = 0
        freq: dict[int, int] = {}
        for ex in examples:
            if len(ex.active) > eta:
                eta = len(ex.active)
            for f in ex.active:
                freq[f] = freq.get(f, 0) + 1
        return cls(examples, eta, freq, tuple(sorted(dense_ids)))

    def labels(self) -> np.ndarray:
        return np.fromiter((ex.label for ex in self.examples), dtype=np.int8, count=self.n)


def _parse_label(tok: str, line_no: int) -> int:
    try:
        val = float(tok)
    except ValueError:
        raise LibsvmParseError(f"unparseable label {tok!r}", line_no) from None
    if val == 1.0:
        return 1
    if val == 0.0 or val == -1.0:
        return 0
    raise LibsvmParseError(f"label {tok!r} not in {{0,1}} or {{-1,+1}}", line_no)


def _open_text(source) -> IO[str]:
    if isinstance(source, (str, Path)):
        path = Path(source)
        if path.suffix == ".gz":
            return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
        if path.suffix == ".bz2":
            import bz2

            return io.TextIOWrapper(bz2.open(path, "rb"), encoding="utf-8")
        return open(path, "rt", encoding="utf-8")
    return source


def parse_libsvm(
    source,
    dense_ids: Sequence[int] = (),
    string_features: bool = False,
) -> SparseDataset:
    """Parse ``<label> <idx>:<val> ...`` lines into a :class:`SparseDataset`.

    Labels in {0,1} or {-1,+1} (mapped to {0,1}); anything else is rejected.
    Sparse feature values are dropped (presence only) and ids deduplicated per
    line.  When ``dense_ids`` is given, those features are routed to the dense
    side vector instead (ordered by sorted id, missing -> 0.0, last value
    wins on duplicates).  With ``string_features`` the index token may be an
    arbitrary string and is mapped through a stable 64-bit hash.
    """
    dense_sorted = tuple(sorted(dense_ids))
    dense_pos = {f: i for i, f in enumerate(dense_sorted)}
    examples = []
    stream = _open_text(source)
    close = stream is not source
    try:
        for line_no, line in enumerate(stream, start=1):
            line = line.strip()
            if not line:
                continue
            toks = line.split()
            label = _parse_label(toks[0], line_no)
            active: set[int] = set()
            dense_vals = [0.0] * len(dense_sorted)
            for tok in toks[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise LibsvmParseError(f"malformed feature token {tok!r}", line_no)
                if string_features:
                    fid = feature_id_from_string(idx_s)
                else:
                    try:
                        fid = int(idx_s)
                    except ValueError:
                        raise LibsvmParseError(f"non-integer feature index {idx_s!r}", line_no) from None
                    if fid < 0:
                        raise LibsvmParseError(f"negative feature index {fid}", line_no)
                try:
                    val = float(val_s)
                except ValueError:
                    raise LibsvmParseError(f"unparseable value {val_s!r}", line_no) from None
                if fid in dense_pos:
                    dense_vals[dense_pos[fid]] = val
                else:
                    active.add(fid)
            examples.append(Example(label, tuple(sorted(active)), tuple(dense_vals)))
    finally:
        if close:
            stream.close()
    return SparseDataset.from_examples(examples, dense_sorted)


def serialize_libsvm(ds: SparseDataset, sink) -> None:
    """Inverse of :func:`parse_libsvm` for presence-only features."""
    stream = sink if not isinstance(sink, (str, Path)) else open(sink, "wt", encoding="utf-8")
    close = stream is not sink
    try:
        for ex in ds.examples:
            parts = [str(ex.label)]
            parts.extend(f"{f}:1" for f in ex.active)
            parts.extend(f"{fid}:{val:.17g}" for fid, val in zip(ds.dense_ids, ex.dense))
            stream.write(" ".join(parts) + "\n")
    finally:
        if close:
            stream.close()


def chronological_split(ds: SparseDataset, train_fraction: float) -> tuple[SparseDataset, SparseDataset]:
    """Split in order: the first ceil(n * fraction) examples form the train side."""
    if not ds.examples:
        raise DatasetError("cannot split an empty dataset")
    if not (0.0 < train_fraction < 1.0):
        raise DatasetError(f"train_fraction must be in (0,1), got {train_fraction}")
    # guard against float noise in n * fraction (e.g. 10 * 0.8 -> 8.000000000000002)
    cut = math.ceil(ds.n * train_fraction - 1e-9)
    return split_at(ds, cut)


def split_at(ds: SparseDataset, n_train: int) -> tuple[SparseDataset, SparseDataset]:
    """Split after exactly ``n_train`` examples, preserving order."""
    if not (0 <= n_train <= ds.n):
        raise DatasetError(f"n_train {n_train} outside [0, {ds.n}]")
    head = SparseDataset.from_examples(ds.examples[:n_train], ds.dense_ids)
    tail = SparseDataset.from_examples(ds.examples[n_train:], ds.dense_ids)
    return head, tail


def example_split_hash(ex: Example) -> int:
    """The documented split hash: blake2b-64 of the active ids as little-endian u64s."""
    return hash_bytes(np.asarray(ex.active, dtype="<u8").tobytes())


def hash_split(ds: SparseDataset) -> tuple[SparseDataset, SparseDataset]:
    """Deterministic half split by the lowest bit of :func:`example_split_hash`.

    Bit 0 -> first half (probability estimation), bit 1 -> second half
    (model fitting).  The same example always lands on the same side.
    """
    est, fit = [], []
    for ex in ds.examples:
        (fit if example_split_hash(ex) & 1 else est).append(ex)
    return (
        SparseDataset.from_examples(est, ds.dense_ids),
        SparseDataset.from_examples(fit, ds.dense_ids),
    )


def detect_dense(ds: SparseDataset, threshold: float = 0.1) -> tuple[set[int], set[int]]:
    """Partition feature ids into dense (> threshold * n rows) and sparse."""
    dense, sparse = set(), set()
    cut = threshold * ds.n
    for f, c in ds.feature_freq.items():
        (dense if c > cut else sparse).add(f)
    return dense, sparse


# ---------------------------------------------------------------------------
# binary cache + JSON summary

def save_cache(ds: SparseDataset, path) -> None:
    """Write the little-endian, length-prefixed binary cache.

    Layout: magic(8) | n u64 | eta u32 | n_dense u32 | dense ids u64[n_dense]
    then per example: label u8 | n_active u32 | active u64[n_active] |
    dense f64[n_dense].
    """
    with open(path, "wb") as f:
        f.write(_CACHE_MAGIC)
        f.write(struct.pack("<QII", ds.n, ds.eta, ds.n_dense))
        f.write(np.asarray(ds.dense_ids, dtype="<u8").tobytes())
        for ex in ds.examples:
            f.write(struct.pack("<BI", ex.label, len(ex.active)))
            f.write(np.asarray(ex.active, dtype="<u8").tobytes())
            if ds.n_dense:
                f.write(np.asarray(ex.dense, dtype="<f8").tobytes())


def load_cache(path) -> SparseDataset:
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != _CACHE_MAGIC:
            raise DatasetError(f"bad cache magic {magic!r}")
        n, eta, n_dense = struct.unpack("<QII", f.read(16))
        dense_ids = tuple(np.frombuffer(f.read(8 * n_dense), dtype="<u8").tolist())
        examples = []
        for _ in range(n):
            label, n_active = struct.unpack("<BI", f.read(5))
            active = tuple(np.frombuffer(f.read(8 * n_active), dtype="<u8").tolist())
            dense = ()
            if n_dense:
                dense = tuple(np.frombuffer(f.read(8 * n_dense), dtype="<f8").tolist())
            examples.append(Example(label, active, dense))
    ds = SparseDataset.from_examples(examples, dense_ids)
    if ds.eta != eta:
        raise DatasetError(f"cache eta mismatch: header {eta}, recomputed {ds.eta}")
    return ds


def summary(ds: SparseDataset) -> dict:
    return {
        "n": ds.n,
        "eta": ds.eta,
        "feature_count": len(ds.feature_freq),
        "positives": int(sum(ex.label for ex in ds.examples)),
        "total_nnz": int(sum(ds.feature_freq.values())),
        "dense_ids": list(ds.dense_ids),
    }


def save_summary(ds: SparseDataset, path) -> None:
    Path(path).write_text(json.dumps(summary(ds), indent=2, sort_keys=True))
