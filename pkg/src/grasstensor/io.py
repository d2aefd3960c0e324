"""File formats: GTEN1 binary tensors, JSON tensors/points/objectives, CSV matrices and traces.

GTEN1 layout (little-endian): the 4 bytes ``GTEN``, u8 version (1), u8 field
(0 real, 1 complex), u8 order r, r x u64 dimensions, then the entries as f64
in canonical C order (``re, im`` pairs for complex data).

All writers go through :func:`atomic_write_bytes`: data is written to a
temporary file in the target directory and renamed into place, so a failed
run never leaves a partial file behind.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import struct
import tempfile
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .grassmann import GrassPoint, ProductPoint
from .objective import Dense, Diagonal, KroneckerFactors, ObjectiveMatrix, RankOne, SumKronPowers

MAGIC = b"GTEN"
VERSION = 1


class MalformedInputError(ValueError):
    """Input file could not be parsed; the message names the file (and line when known)."""


# -- atomic output ------------------------------------------------------------

def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# -- GTEN1 ----------------------------------------------------------------------

def gten_bytes(T) -> bytes:
    array = np.asarray(T)
    if array.ndim < 1:
        raise ValueError("tensor order must be at least 1")
    if array.ndim > 255:
        raise ValueError("order exceeds the format limit of 255")
    is_complex = np.iscomplexobj(array)
    header = MAGIC + struct.pack("<BBB", VERSION, int(is_complex), array.ndim)
    header += struct.pack(f"<{array.ndim}Q", *array.shape)
    flat = np.ascontiguousarray(array).reshape(-1)
    if is_complex:
        payload = flat.astype("<c16").tobytes()
    else:
        payload = flat.astype("<f8").tobytes()
    return header + payload


def write_gten(path, T) -> None:
    atomic_write_bytes(path, gten_bytes(T))


def parse_gten(data: bytes, source: str = "<bytes>") -> np.ndarray:
    if len(data) < 7 or data[:4] != MAGIC:
        raise MalformedInputError(f"{source}: missing GTEN magic bytes")
    version, field_code, order = struct.unpack_from("<BBB", data, 4)
    if version != VERSION:
        raise MalformedInputError(f"{source}: unsupported GTEN version {version}")
    if field_code not in (0, 1):
        raise MalformedInputError(f"{source}: invalid field code {field_code}")
    if order < 1:
        raise MalformedInputError(f"{source}: tensor order must be at least 1")
    offset = 7
    if len(data) < offset + 8 * order:
        raise MalformedInputError(f"{source}: truncated dimension table")
    dims = struct.unpack_from(f"<{order}Q", data, offset)
    offset += 8 * order
    if any(d < 1 for d in dims):
        raise MalformedInputError(f"{source}: dimensions must be positive, got {dims}")
    count = int(np.prod(dims, dtype=object))
    width = 16 if field_code else 8
    expected = offset + count * width
    if len(data) != expected:
        raise MalformedInputError(
            f"{source}: expected {expected} bytes for shape {tuple(dims)}, found {len(data)}"
        )
    dtype = "<c16" if field_code else "<f8"
    flat = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    return flat.astype(np.complex128 if field_code else np.float64).reshape(dims)


def read_gten(path) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise MalformedInputError(f"{path}: {exc.strerror or exc}") from exc
    return parse_gten(data, str(path))


# -- JSON helpers -------------------------------------------------------------

def _encode_array(array: np.ndarray):
    array = np.asarray(array)
    if np.iscomplexobj(array):
        pairs = np.stack([array.real, array.imag], axis=-1)
        return pairs.tolist()
    return array.astype(float).tolist()


def _decode_array(data, shape: Sequence[int] | None, is_complex: bool, source: str) -> np.ndarray:
    try:
        array = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise MalformedInputError(f"{source}: non-numeric or ragged array data") from exc
    if is_complex:
        if array.ndim < 1 or array.shape[-1] != 2:
            raise MalformedInputError(f"{source}: complex entries must be [re, im] pairs")
        array = array[..., 0] + 1j * array[..., 1]
    if shape is not None and tuple(array.shape) != tuple(shape):
        raise MalformedInputError(f"{source}: data shape {array.shape} does not match declared {tuple(shape)}")
    return array


def tensor_to_json(T) -> dict:
    array = np.asarray(T)
    return {
        "shape": list(array.shape),
        "field": "complex" if np.iscomplexobj(array) else "real",
        "data": _encode_array(array),
    }


def tensor_from_json(obj: dict, source: str = "<json>") -> np.ndarray:
    if not isinstance(obj, dict) or "shape" not in obj or "data" not in obj:
        raise MalformedInputError(f"{source}: tensor JSON needs 'shape' and 'data'")
    field = obj.get("field", "real")
    if field not in ("real", "complex"):
        raise MalformedInputError(f"{source}: unknown field {field!r}")
    shape = [int(s) for s in obj["shape"]]
    if not shape or any(s < 1 for s in shape):
        raise MalformedInputError(f"{source}: invalid shape {shape}")
    return _decode_array(obj["data"], shape, field == "complex", source)


def _load_json(path) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedInputError(f"{path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInputError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc


def read_tensor(path) -> np.ndarray:
    """Load a tensor from ``.gten`` (binary) or ``.json``."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return tensor_from_json(_load_json(path), str(path))
    return read_gten(path)


def write_tensor_json(path, T) -> None:
    atomic_write_text(path, dumps(tensor_to_json(T)))


def dumps(obj) -> str:
    """Canonical JSON text (sorted keys, fixed indentation, trailing newline)."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# -- product points -------------------------------------------------------------

def point_to_json(P: ProductPoint) -> dict:
    factors = []
    for pt in P:
        frame = pt.frame.astype(complex)
        factors.append({"n": pt.n, "m": pt.m, "frame": _encode_array(frame)})
    return {"field": P.field, "factors": factors}


def point_from_json(obj: dict, source: str = "<json>") -> ProductPoint:
    if not isinstance(obj, dict) or "factors" not in obj:
        raise MalformedInputError(f"{source}: point JSON needs 'factors'")
    field = obj.get("field", "complex")
    points = []
    for i, fac in enumerate(obj["factors"]):
        where = f"{source} factor {i}"
        try:
            n, m = int(fac["n"]), int(fac["m"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInputError(f"{where}: needs integer 'n' and 'm'") from exc
        frame = _decode_array(fac.get("frame"), (n, n), True, where)
        if field == "real":
            frame = frame.real
        if np.linalg.norm(frame.conj().T @ frame - np.eye(n)) > 1e-8:
            raise MalformedInputError(f"{where}: frame is not unitary")
        try:
            points.append(GrassPoint(m, frame))
        except ValueError as exc:
            raise MalformedInputError(f"{where}: {exc}") from exc
    try:
        return ProductPoint(tuple(points))
    except ValueError as exc:
        raise MalformedInputError(f"{source}: {exc}") from exc


def read_point(path) -> ProductPoint:
    return point_from_json(_load_json(path), str(path))


# -- CSV ------------------------------------------------------------------------

def read_csv_matrix(path) -> np.ndarray:
    """Numeric CSV (one row per line, ``#`` comments and blank lines skipped)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedInputError(f"{path}: {exc.strerror or exc}") from exc
    rows, width = [], None
    for lineno, row in enumerate(csv.reader(_io.StringIO(text)), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        try:
            values = [float(x) for x in row]
        except ValueError as exc:
            raise MalformedInputError(f"{path}:{lineno}: {exc}") from exc
        if not all(math.isfinite(v) for v in values):
            raise MalformedInputError(f"{path}:{lineno}: non-finite value")
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise MalformedInputError(f"{path}:{lineno}: expected {width} columns, found {len(values)}")
        rows.append(values)
    if not rows:
        raise MalformedInputError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def matrix_to_csv(M: np.ndarray) -> str:
    out = _io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    for row in np.atleast_2d(M):
        writer.writerow([repr(float(x)) for x in row])
    return out.getvalue()


TRACE_COLUMNS = ("iter", "rho", "relgrad", "alpha", "millis")


def _fmt(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def trace_to_csv(trace, timing: bool = False) -> str:
    """Trace as CSV text.  ``millis`` is left empty unless ``timing`` is set,
    which keeps repeated runs byte-identical."""
    out = _io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for rec in trace:
        writer.writerow([rec.iter, _fmt(rec.rho), _fmt(rec.relgrad), _fmt(rec.alpha),
                         f"{rec.millis:.3f}" if timing else ""])
    return out.getvalue()


def read_trace_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# -- objective descriptors ------------------------------------------------------

def _resolve(base: Path | None, ref: str) -> Path:
    p = Path(ref)
    if not p.is_absolute() and base is not None:
        p = base / p
    return p


def objective_from_descriptor(desc: dict, base_dir=None, source: str = "<descriptor>") -> ObjectiveMatrix:
    """Build an objective from ``{"variant": ..., ...}``.

    Payloads may be inline arrays or file references: ``tensor_path`` (GTEN1
    or JSON) for rank-one objectives, ``points_path`` (CSV) for sums of
    Kronecker powers.  Relative paths are resolved against ``base_dir``.
    """
    if not isinstance(desc, dict) or "variant" not in desc:
        raise MalformedInputError(f"{source}: descriptor needs a 'variant'")
    base = Path(base_dir) if base_dir is not None else None
    variant = desc["variant"]
    sense = desc.get("sense", "maximize")
    try:
        if variant == "dense":
            dims = [int(n) for n in desc["dims"]]
            A = _decode_array(desc["matrix"], None, desc.get("field") == "complex", source)
            return Dense(A, dims, sense)
        if variant == "rank_one":
            if "tensor_path" in desc:
                T = read_tensor(_resolve(base, desc["tensor_path"]))
            else:
                T = tensor_from_json(desc["tensor"], source)
            return RankOne(T, sense)
        if variant == "kronecker":
            field = desc.get("field") == "complex"
            factors = [_decode_array(F, None, field, source) for F in desc["factors"]]
            return KroneckerFactors(factors, sense)
        if variant == "sum_kron_powers":
            if "points_path" in desc:
                X = read_csv_matrix(_resolve(base, desc["points_path"]))
            else:
                X = _decode_array(desc["points"], None, desc.get("field") == "complex", source)
            return SumKronPowers(X, int(desc["power"]), sense)
        if variant == "diagonal":
            return Diagonal(np.asarray(desc["d"], dtype=float), [int(n) for n in desc["dims"]], sense)
    except KeyError as exc:
        raise MalformedInputError(f"{source}: variant {variant!r} is missing field {exc}") from exc
    raise MalformedInputError(f"{source}: unknown variant {variant!r}")


def objective_to_descriptor(A: ObjectiveMatrix) -> dict:
    """Inline descriptor (arrays embedded) for any variant."""
    desc: dict[str, Any] = {"variant": A.variant, "sense": A.sense}
    if isinstance(A, Dense):
        desc.update(dims=list(A.dims), field="complex" if np.iscomplexobj(A.A) else "real",
                    matrix=_encode_array(A.A))
    elif isinstance(A, RankOne):
        desc["tensor"] = tensor_to_json(A.tensor)
    elif isinstance(A, KroneckerFactors):
        cplx = any(np.iscomplexobj(F) for F in A.factors)
        desc.update(field="complex" if cplx else "real",
                    factors=[_encode_array(F.astype(complex) if cplx else F) for F in A.factors])
    elif isinstance(A, SumKronPowers):
        desc.update(field="complex" if np.iscomplexobj(A.points) else "real",
                    points=_encode_array(A.points), power=A.order)
    elif isinstance(A, Diagonal):
        desc.update(d=A.d.tolist(), dims=list(A.dims))
    return desc


def read_objective(path) -> ObjectiveMatrix:
    path = Path(path)
    return objective_from_descriptor(_load_json(path), path.parent, str(path))
