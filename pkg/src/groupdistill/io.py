"""File formats: corpus CSV/binary, score CSV, group CSV, pair CSV.

Text formats are plain CSV with fixed headers. Floats are written in
scientific notation with 17 significant digits, which round-trips float64
exactly. The binary corpus format is little-endian throughout and starts with
the magic ``DDL1``; model files (see :mod:`groupdistill.distill`) start with
``DDLM``.
"""

from __future__ import annotations

import csv
import struct
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .aggregate import GroupRepresentation
from .data import UNLABELED, Corpus, DiscriminabilityRecord
from .exceptions import FormatError, ParseError, SchemaError, ValidationError

CORPUS_MAGIC = b"DDL1"


def _fmt(x: float) -> str:
    """Render a float with enough digits to round-trip exactly."""
    return f"{float(x):.16e}"


def _parse_float(text: str, line_no: int, field: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(
            f"line {line_no}: field {field!r}: {text!r} is not a number"
        ) from None


def _read_rows(path) -> list[list[str]]:
    with open(path, "r", newline="") as fh:
        return list(csv.reader(fh))


def _check_width(row: Sequence[str], expected: int, line_no: int) -> None:
    if len(row) != expected:
        raise SchemaError(
            f"line {line_no}: expected {expected} fields, got {len(row)}"
        )


# -- corpus CSV -----------------------------------------------------------------


def _corpus_header(d_raw: int, d_emb: int) -> list[str]:
    return (["element_id", "group_id", "class_label"]
            + [f"raw_{i}" for i in range(d_raw)]
            + [f"emb_{i}" for i in range(d_emb)])


def _parse_corpus_header(header: Sequence[str]) -> tuple[int, int]:
    cols = list(header)
    if cols[:3] != ["element_id", "group_id", "class_label"]:
        raise SchemaError(
            "header must start with element_id,group_id,class_label, got "
            f"{cols[:3]}"
        )
    d_raw = 0
    i = 3
    while i < len(cols) and cols[i] == f"raw_{d_raw}":
        d_raw += 1
        i += 1
    d_emb = 0
    while i < len(cols) and cols[i] == f"emb_{d_emb}":
        d_emb += 1
        i += 1
    if d_raw == 0 or d_emb == 0 or i != len(cols):
        raise SchemaError(
            "header must list raw_0..raw_{n} then emb_0..emb_{m}, got "
            f"{cols[3:]}"
        )
    return d_raw, d_emb


def save_corpus_csv(corpus: Corpus, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_corpus_header(corpus.d_raw, corpus.d_emb))
        for i in range(corpus.size):
            label = int(corpus.labels[i])
            writer.writerow(
                [corpus.element_ids[i], corpus.group_ids[i],
                 "" if label == UNLABELED else str(label)]
                + [_fmt(v) for v in corpus.raw_inputs[i]]
                + [_fmt(v) for v in corpus.embeddings[i]]
            )


def load_corpus_csv(path) -> Corpus:
    rows = _read_rows(path)
    if not rows:
        raise SchemaError(f"{path}: empty file, expected a header row")
    d_raw, d_emb = _parse_corpus_header(rows[0])
    width = 3 + d_raw + d_emb
    ids, gids, labels = [], [], []
    raw = np.empty((len(rows) - 1, d_raw))
    emb = np.empty((len(rows) - 1, d_emb))
    for r, row in enumerate(rows[1:]):
        line_no = r + 2
        _check_width(row, width, line_no)
        ids.append(row[0])
        gids.append(row[1])
        if row[2] == "":
            labels.append(UNLABELED)
        else:
            try:
                label = int(row[2])
            except ValueError:
                label = -1
            if label < 0:
                raise ParseError(
                    f"line {line_no}: class_label must be empty or a "
                    f"non-negative integer, got {row[2]!r}"
                )
            labels.append(label)
        for j in range(d_raw):
            raw[r, j] = _parse_float(row[3 + j], line_no, f"raw_{j}")
        for j in range(d_emb):
            emb[r, j] = _parse_float(row[3 + d_raw + j], line_no, f"emb_{j}")
    return Corpus(
        element_ids=tuple(ids), group_ids=tuple(gids),
        labels=np.array(labels, dtype=np.int64),
        raw_inputs=raw, embeddings=emb,
    )


# -- corpus binary ----------------------------------------------------------------
#
# magic "DDL1" | u32 element count | u32 d_raw | u32 d_emb | per element:
#   u32 id length, utf-8 id | u32 group-id length, utf-8 group id |
#   i64 class label (-1 = unlabeled) | d_raw f64 | d_emb f64


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.path}: truncated file")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self.take(8))[0]

    def f64s(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(float)


def save_corpus_binary(corpus: Corpus, path) -> None:
    parts = [CORPUS_MAGIC,
             struct.pack("<III", corpus.size, corpus.d_raw, corpus.d_emb)]
    for i in range(corpus.size):
        for text in (corpus.element_ids[i], corpus.group_ids[i]):
            encoded = text.encode("utf-8")
            parts.append(struct.pack("<I", len(encoded)))
            parts.append(encoded)
        parts.append(struct.pack("<q", int(corpus.labels[i])))
        parts.append(np.ascontiguousarray(corpus.raw_inputs[i], dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(corpus.embeddings[i], dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_corpus_binary(path) -> Corpus:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != CORPUS_MAGIC:
        raise FormatError(f"{path}: not a corpus file (bad magic {data[:4]!r})")
    reader = _Reader(data, path)
    reader.take(4)
    size, d_raw, d_emb = reader.u32(), reader.u32(), reader.u32()
    if size == 0 or d_raw == 0 or d_emb == 0:
        raise FormatError(
            f"{path}: declared sizes must be positive, got "
            f"{size} x ({d_raw}, {d_emb})"
        )
    ids, gids, labels = [], [], []
    raw = np.empty((size, d_raw))
    emb = np.empty((size, d_emb))
    for i in range(size):
        ids.append(reader.take(reader.u32()).decode("utf-8"))
        gids.append(reader.take(reader.u32()).decode("utf-8"))
        labels.append(reader.i64())
        raw[i] = reader.f64s(d_raw)
        emb[i] = reader.f64s(d_emb)
    if reader.pos != len(data):
        raise FormatError(
            f"{path}: {len(data) - reader.pos} trailing bytes after "
            f"{size} elements"
        )
    return Corpus(
        element_ids=tuple(ids), group_ids=tuple(gids),
        labels=np.array(labels, dtype=np.int64),
        raw_inputs=raw, embeddings=emb,
    )


def save_corpus(corpus: Corpus, path, format: str | None = None) -> None:
    """Write a corpus; format ``"csv"`` or ``"binary"`` (default: by suffix,
    ``.bin`` means binary)."""
    fmt = format or ("binary" if str(path).endswith(".bin") else "csv")
    if fmt == "csv":
        save_corpus_csv(corpus, path)
    elif fmt == "binary":
        save_corpus_binary(corpus, path)
    else:
        raise ValidationError(f"unknown corpus format {fmt!r}")


def load_corpus(path, format: str | None = None) -> Corpus:
    """Read a corpus; when ``format`` is None the file is sniffed for the
    binary magic."""
    if format is None:
        with open(path, "rb") as fh:
            format = "binary" if fh.read(4) == CORPUS_MAGIC else "csv"
    if format == "csv":
        return load_corpus_csv(path)
    if format == "binary":
        return load_corpus_binary(path)
    raise ValidationError(f"unknown corpus format {format!r}")


# -- score CSV --------------------------------------------------------------------

SCORE_HEADER = ["element_id", "d_raw", "d_score", "d_hat"]


def save_scores(records: Iterable[DiscriminabilityRecord], path) -> None:
    records = list(records)
    if not records:
        raise ValidationError("no score records to write")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCORE_HEADER)
        for rec in records:
            writer.writerow([
                rec.element_id, _fmt(rec.d_raw), _fmt(rec.d_score),
                "" if rec.d_hat is None else _fmt(rec.d_hat),
            ])


def load_scores(path) -> list[DiscriminabilityRecord]:
    rows = _read_rows(path)
    if not rows or rows[0] != SCORE_HEADER:
        raise SchemaError(
            f"{path}: expected header {','.join(SCORE_HEADER)}"
        )
    out = []
    seen: set[str] = set()
    for r, row in enumerate(rows[1:]):
        line_no = r + 2
        _check_width(row, 4, line_no)
        if row[0] in seen:
            raise ValidationError(
                f"line {line_no}: duplicate element_id {row[0]!r}"
            )
        seen.add(row[0])
        out.append(DiscriminabilityRecord(
            element_id=row[0],
            d_raw=_parse_float(row[1], line_no, "d_raw"),
            d_score=_parse_float(row[2], line_no, "d_score"),
            d_hat=None if row[3] == ""
            else _parse_float(row[3], line_no, "d_hat"),
        ))
    if not out:
        raise SchemaError(f"{path}: no score rows")
    return out


# -- group CSV --------------------------------------------------------------------


class GroupRow(NamedTuple):
    """One stored group representation: id, survivor count, group size,
    pooled feature."""

    group_id: str
    used: int
    total: int
    feature: np.ndarray


def save_groups(representations: Iterable[GroupRepresentation], path) -> None:
    reps = list(representations)
    if not reps:
        raise ValidationError("no group representations to write")
    d = reps[0].feature.size
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group_id", "n", "total"] + [f"f_{i}" for i in range(d)])
        for rep in reps:
            if rep.feature.size != d:
                raise ValidationError(
                    f"group {rep.group_id!r}: inconsistent feature dimension"
                )
            writer.writerow(
                [rep.group_id, str(rep.used_count), str(rep.total_count)]
                + [_fmt(v) for v in rep.feature]
            )


def load_groups(path) -> list[GroupRow]:
    rows = _read_rows(path)
    if not rows:
        raise SchemaError(f"{path}: empty file, expected a header row")
    header = rows[0]
    if header[:3] != ["group_id", "n", "total"]:
        raise SchemaError(
            f"{path}: header must start with group_id,n,total, got {header[:3]}"
        )
    d = len(header) - 3
    if d < 1 or header[3:] != [f"f_{i}" for i in range(d)]:
        raise SchemaError(f"{path}: feature columns must be f_0..f_{{n}}")
    out = []
    seen: set[str] = set()
    for r, row in enumerate(rows[1:]):
        line_no = r + 2
        _check_width(row, 3 + d, line_no)
        if row[0] in seen:
            raise ValidationError(
                f"line {line_no}: duplicate group_id {row[0]!r}"
            )
        seen.add(row[0])
        try:
            used, total = int(row[1]), int(row[2])
        except ValueError:
            raise ParseError(
                f"line {line_no}: n and total must be integers"
            ) from None
        if not 1 <= used <= total:
            raise ValidationError(
                f"line {line_no}: n must lie in [1, total], got {used}/{total}"
            )
        feature = np.array(
            [_parse_float(row[3 + j], line_no, f"f_{j}") for j in range(d)]
        )
        out.append(GroupRow(row[0], used, total, feature))
    if not out:
        raise SchemaError(f"{path}: no group rows")
    return out


# -- pair CSV ---------------------------------------------------------------------

PAIR_HEADER = ["group_a", "group_b", "is_same"]
_TRUE = {"1", "true"}
_FALSE = {"0", "false"}


def save_pairs(pairs: Iterable[tuple[str, str, bool]], path) -> None:
    pairs = list(pairs)
    if not pairs:
        raise ValidationError("no pairs to write")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PAIR_HEADER)
        for a, b, is_same in pairs:
            writer.writerow([a, b, "1" if is_same else "0"])


def load_pairs(path) -> list[tuple[str, str, bool]]:
    rows = _read_rows(path)
    if not rows or rows[0] != PAIR_HEADER:
        raise SchemaError(f"{path}: expected header {','.join(PAIR_HEADER)}")
    out = []
    for r, row in enumerate(rows[1:]):
        line_no = r + 2
        _check_width(row, 3, line_no)
        flag = row[2].strip().lower()
        if flag in _TRUE:
            is_same = True
        elif flag in _FALSE:
            is_same = False
        else:
            raise ParseError(
                f"line {line_no}: is_same must be 0/1/true/false, got "
                f"{row[2]!r}"
            )
        out.append((row[0], row[1], is_same))
    if not out:
        raise SchemaError(f"{path}: no pair rows")
    return out


# -- small generic tables ----------------------------------------------------------


def write_table_csv(path, fieldnames: Sequence[str],
                    rows: Iterable[Mapping]) -> None:
    """Write dict rows as CSV; floats get full round-trip precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(fieldnames))
        for row in rows:
            writer.writerow([
                _fmt(row[f]) if isinstance(row.get(f), float) else str(row.get(f, ""))
                for f in fieldnames
            ])


def save_ground_truth(levels: Mapping[str, float], path) -> None:
    """Per-element noise levels from the synthetic generator."""
    write_table_csv(path, ["element_id", "noise_level"],
                    [{"element_id": k, "noise_level": float(v)}
                     for k, v in levels.items()])


def load_ground_truth(path) -> dict[str, float]:
    rows = _read_rows(path)
    if not rows or rows[0] != ["element_id", "noise_level"]:
        raise SchemaError(f"{path}: expected header element_id,noise_level")
    out: dict[str, float] = {}
    for r, row in enumerate(rows[1:]):
        line_no = r + 2
        _check_width(row, 2, line_no)
        if row[0] in out:
            raise ValidationError(
                f"line {line_no}: duplicate element_id {row[0]!r}"
            )
        out[row[0]] = _parse_float(row[1], line_no, "noise_level")
    return out
