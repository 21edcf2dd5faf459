"""Dense matrix carrier, deterministic RNG, and tensor file I/O.

Matrices are plain 2-D numpy arrays, row-major, float64 inside the
library; float32 appears only at file boundaries.  Files use the NPY
v1.0 container with little-endian '<f4' or '<f8' payloads and
fortran_order=False.
"""

import ast

import numpy as np

from .errors import DimensionError, FormatError, TruncationError

_MAGIC = b"\x93NUMPY"
_SUPPORTED_DESCR = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; identical seed gives an identical stream
    on every platform."""
    return np.random.Generator(np.random.Philox(seed))


def read_tensor(path) -> np.ndarray:
    """Read an NPY v1.0 file into a 2-D array.

    1-D tensors load as 1 x n.  The array keeps the file dtype (f4 or
    f8); callers convert to float64 at the library boundary.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 10 or raw[:6] != _MAGIC:
        raise FormatError("bad magic: not an NPY file")
    if raw[6:8] != b"\x01\x00":
        raise FormatError(f"unsupported version: {raw[6]}.{raw[7]} (want 1.0)")
    header_len = int.from_bytes(raw[8:10], "little")
    header_end = 10 + header_len
    if len(raw) < header_end:
        raise FormatError("truncated header")
    try:
        header = ast.literal_eval(raw[10:header_end].decode("ascii"))
    except (ValueError, SyntaxError, UnicodeDecodeError) as exc:
        raise FormatError(f"unparseable header dict: {exc}") from exc
    if not isinstance(header, dict):
        raise FormatError("header is not a dict")
    for key in ("descr", "fortran_order", "shape"):
        if key not in header:
            raise FormatError(f"header missing field: {key}")
    descr = header["descr"]
    if descr not in _SUPPORTED_DESCR:
        raise FormatError(f"unsupported descr: {descr!r} (want '<f4' or '<f8')")
    if header["fortran_order"] is not False:
        raise FormatError("fortran_order must be False")
    shape = header["shape"]
    if not isinstance(shape, tuple) or len(shape) not in (1, 2) or not all(
        isinstance(s, int) and s >= 0 for s in shape
    ):
        raise FormatError(f"unsupported shape: {shape!r} (want 1-D or 2-D)")
    dtype = _SUPPORTED_DESCR[descr]
    count = int(np.prod(shape, dtype=np.int64)) if shape else 0
    payload = raw[header_end:]
    if len(payload) != count * dtype.itemsize:
        raise TruncationError(
            f"shape {shape} needs {count * dtype.itemsize} payload bytes, "
            f"file has {len(payload)}"
        )
    data = np.frombuffer(payload, dtype=dtype).copy()
    if len(shape) == 1:
        shape = (1, shape[0])
    return data.reshape(shape)


def write_tensor(m: np.ndarray, path) -> None:
    """Write a 2-D array as NPY v1.0.  dtype follows the array: float32
    arrays are written as '<f4', everything else as '<f8'."""
    m = np.asarray(m)
    if m.ndim != 2:
        raise DimensionError(f"write_tensor wants a 2-D array, got ndim={m.ndim}")
    if m.dtype == np.float32:
        descr, out = "<f4", np.ascontiguousarray(m, dtype="<f4")
    else:
        descr, out = "<f8", np.ascontiguousarray(m, dtype="<f8")
    header = (
        f"{{'descr': '{descr}', 'fortran_order': False, "
        f"'shape': ({m.shape[0]}, {m.shape[1]}), }}"
    )
    # Pad so that magic+version+len+header is a multiple of 64, ending in \n.
    unpadded = len(_MAGIC) + 2 + 2 + len(header) + 1
    pad = (64 - unpadded % 64) % 64
    header = header + " " * pad + "\n"
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(b"\x01\x00")
        fh.write(len(header).to_bytes(2, "little"))
        fh.write(header.encode("ascii"))
        fh.write(out.tobytes())


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with explicit shape checking, float64 accumulation."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError("matmul wants 2-D operands")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def frobenius_distance(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b||_F; zero iff the operands carry identical data."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))
