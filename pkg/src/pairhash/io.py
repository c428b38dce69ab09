"""Feature files, code files and model checkpoints.

Binary layouts (all integers and floats little-endian):

``PHFT`` feature file::

    magic "PHFT" | n: u64 | d: u64 | has_labels: u8
    n*d float32 features, row-major
    if has_labels: per row, count: u32 followed by count u32 label ids

``PHCD`` code file::

    magic "PHCD" | version: u32 | n: u64 | c: u32
    n * ceil(c/64) u64 words (same packing as CodeMatrix)

``PHSH`` checkpoint::

    magic "PHSH" | version: u32 | meta_len: u32 | meta: UTF-8 JSON
    arrays, each: ndim: u32 | shape: ndim * u64 | float64 payload
    crc32 of everything above: u32

Array order in a checkpoint is W, v, then extractor weight/bias pairs.
"""
from __future__ import annotations

import csv
import io
import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CodeMatrix, Dataset, ModelParameters, validate_dataset
from .errors import CorruptPayload, HeaderMismatch, ParseError, VersionMismatch
from .extractor import ExtractorParams, ExtractorSpec
from .trainer import TrainConfig

FEATURE_MAGIC = b"PHFT"
CODE_MAGIC = b"PHCD"
CHECKPOINT_MAGIC = b"PHSH"
CODE_VERSION = 1
CHECKPOINT_VERSION = 1

_FT_HEADER = struct.Struct("<4sQQB")
_CD_HEADER = struct.Struct("<4sIQI")
_CK_HEADER = struct.Struct("<4sII")


# --- datasets ---------------------------------------------------------------

def _detect_format(path: Path) -> str:
    with open(path, "rb") as f:
        return "binary" if f.read(4) == FEATURE_MAGIC else "csv"


def load_dataset(path, format: str = "auto", label_columns: int = 1) -> Dataset:
    """Read and validate a feature file.

    For CSV, the last ``label_columns`` fields of each row hold labels as
    semicolon-separated integers (an empty field means unlabeled); lines
    starting with ``#`` are skipped.
    """
    path = Path(path)
    if format == "auto":
        format = _detect_format(path)
    if format == "csv":
        ds = _read_csv(path.read_text(), label_columns)
    elif format == "binary":
        ds = _read_binary(path.read_bytes())
    else:
        raise ValueError(f"unknown dataset format {format!r}")
    return validate_dataset(ds)


def _read_csv(text: str, label_columns: int) -> Dataset:
    rows, labels = [], []
    width = None
    for lineno, fields in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not fields or not "".join(fields).strip() or fields[0].lstrip().startswith("#"):
            continue
        if len(fields) <= label_columns:
            raise ParseError("row has no feature columns", lineno)
        feats = fields[: len(fields) - label_columns]
        try:
            rows.append([float(x) for x in feats])
            labs = set()
            for field in fields[len(fields) - label_columns :]:
                labs.update(int(x) for x in field.split(";") if x.strip())
        except ValueError as e:
            raise ParseError(str(e), lineno) from None
        if width is None:
            width = len(feats)
        elif len(feats) != width:
            raise ParseError(f"expected {width} features, got {len(feats)}", lineno)
        labels.append(labs)
    return Dataset(np.array(rows, dtype=np.float64).reshape(len(rows), width or 0), tuple(labels))


def _read_binary(data: bytes) -> Dataset:
    if len(data) < _FT_HEADER.size:
        raise HeaderMismatch("file shorter than the PHFT header")
    magic, n, d, flag = _FT_HEADER.unpack_from(data)
    if magic != FEATURE_MAGIC:
        raise HeaderMismatch(f"bad magic {magic!r}")
    offset = _FT_HEADER.size
    need = n * d * 4
    if len(data) - offset < need:
        raise HeaderMismatch(f"header declares {n}x{d} floats, payload has {(len(data) - offset) // 4}")
    feats = np.frombuffer(data, dtype="<f4", count=n * d, offset=offset).reshape(n, d)
    offset += need
    labels: list[set[int]] = []
    if flag:
        for r in range(n):
            if offset + 4 > len(data):
                raise HeaderMismatch(f"label block truncated at row {r}")
            (count,) = struct.unpack_from("<I", data, offset)
            offset += 4
            if offset + 4 * count > len(data):
                raise HeaderMismatch(f"label block truncated at row {r}")
            labels.append(set(np.frombuffer(data, dtype="<u4", count=count, offset=offset).tolist()))
            offset += 4 * count
    else:
        labels = [set() for _ in range(n)]
    if offset != len(data):
        raise HeaderMismatch(f"{len(data) - offset} trailing bytes after payload")
    return Dataset(feats.astype(np.float64), tuple(labels))


def save_dataset(ds: Dataset, path, format: str = "binary") -> None:
    """Write ``ds``; binary features are stored as float32."""
    path = Path(path)
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row, labs in zip(ds.features.tolist(), ds.labels):
            w.writerow([repr(x) for x in row] + [";".join(str(x) for x in sorted(labs))])
        path.write_text(buf.getvalue())
    elif format == "binary":
        parts = [
            _FT_HEADER.pack(FEATURE_MAGIC, ds.n, ds.d, 1),
            np.ascontiguousarray(ds.features, dtype="<f4").tobytes(),
        ]
        for labs in ds.labels:
            parts.append(struct.pack("<I", len(labs)))
            parts.append(np.array(sorted(labs), dtype="<u4").tobytes())
        path.write_bytes(b"".join(parts))
    else:
        raise ValueError(f"unknown dataset format {format!r}")


# --- codes --------------------------------------------------------------------

def save_codes(codes: CodeMatrix, path) -> None:
    header = _CD_HEADER.pack(CODE_MAGIC, CODE_VERSION, codes.n, codes.c)
    Path(path).write_bytes(header + codes.packed.astype("<u8").tobytes())


def load_codes(path) -> CodeMatrix:
    data = Path(path).read_bytes()
    if len(data) < _CD_HEADER.size:
        raise CorruptPayload("file shorter than the PHCD header")
    magic, version, n, c = _CD_HEADER.unpack_from(data)
    if magic != CODE_MAGIC:
        raise HeaderMismatch(f"bad magic {magic!r}")
    if version != CODE_VERSION:
        raise VersionMismatch(f"code file version {version}, expected {CODE_VERSION}")
    words = (c + 63) // 64
    if len(data) != _CD_HEADER.size + 8 * n * words:
        raise CorruptPayload("code payload length does not match header")
    packed = np.frombuffer(data, dtype="<u8", offset=_CD_HEADER.size).reshape(n, words)
    return CodeMatrix(packed.astype(np.uint64), c)


# --- checkpoints ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Checkpoint:
    spec: ExtractorSpec
    params: ModelParameters
    config: TrainConfig | None = None


def _pack_array(a: np.ndarray) -> bytes:
    a = np.asarray(a, dtype="<f8")
    return struct.pack(f"<I{a.ndim}Q", a.ndim, *a.shape) + a.tobytes()


def checkpoint_bytes(ckpt: Checkpoint) -> bytes:
    meta = {
        "extractor": ckpt.spec.to_dict(),
        "code_length": ckpt.params.c,
        "config": None if ckpt.config is None else ckpt.config.to_dict(),
    }
    arrays = [ckpt.params.W, ckpt.params.v, *ckpt.params.theta.arrays()]
    meta["num_arrays"] = len(arrays)
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    body = _CK_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(blob)) + blob
    body += b"".join(_pack_array(a) for a in arrays)
    return body + struct.pack("<I", zlib.crc32(body))


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(ckpt))


def parse_checkpoint(data: bytes) -> Checkpoint:
    if len(data) < _CK_HEADER.size:
        raise CorruptPayload("file shorter than the PHSH header")
    magic, version, meta_len = _CK_HEADER.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise CorruptPayload(f"bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(f"checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    if len(data) < _CK_HEADER.size + meta_len + 4:
        raise CorruptPayload("checkpoint truncated")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptPayload("checksum mismatch")
    offset = _CK_HEADER.size
    try:
        meta = json.loads(body[offset : offset + meta_len])
        offset += meta_len
        arrays = []
        for _ in range(meta["num_arrays"]):
            (ndim,) = struct.unpack_from("<I", body, offset)
            shape = struct.unpack_from(f"<{ndim}Q", body, offset + 4)
            offset += 4 + 8 * ndim
            count = int(np.prod(shape, dtype=np.int64))
            if offset + 8 * count > len(body):
                raise CorruptPayload("array payload truncated")
            arrays.append(np.frombuffer(body, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64))
            offset += 8 * count
        if offset != len(body):
            raise CorruptPayload("trailing bytes in checkpoint body")
        spec = ExtractorSpec.from_dict(meta["extractor"])
        theta = ExtractorParams.from_arrays(arrays[2:])
        theta.check(spec)
        params = ModelParameters(theta, arrays[0], arrays[1])
        config = None if meta["config"] is None else TrainConfig.from_dict(meta["config"])
    except CorruptPayload:
        raise
    except (struct.error, KeyError, ValueError, TypeError) as e:
        raise CorruptPayload(f"malformed checkpoint: {e}") from None
    return Checkpoint(spec, params, config)


def load_checkpoint(path) -> Checkpoint:
    return parse_checkpoint(Path(path).read_bytes())
