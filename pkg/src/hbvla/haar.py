"""One-level Haar analysis/synthesis along rows or columns.

Two kernel normalizations are supported:

* ``"paper"``: analysis kernels [1/2, 1/2] and [1/2, -1/2] with stride 2,
  synthesis via exact pairwise inversion (a = lo + hi, b = lo - hi).
  This matches fixed-kernel convolution quantizers but is not orthogonal,
  so Frobenius norms are not preserved band-wise.
* ``"orthonormal"``: 1/sqrt(2) factors both ways; the transform is
  orthogonal and norm-preserving.

Odd lengths keep the last column (or row) untouched in ``leftover``;
downstream quantization handles it in the spatial domain.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InconsistencyError, PermutationError

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class HaarBands:
    """Low/high subband pair plus the odd-length leftover vector.

    ``axis`` records the direction of application: "rows" means each row
    was transformed (pairing adjacent columns), "cols" the transpose case.
    """

    lo: np.ndarray
    hi: np.ndarray
    leftover: np.ndarray | None
    axis: str
    original_len: int
    normalization: str


def _check_normalization(normalization: str) -> None:
    if normalization not in ("paper", "orthonormal"):
        raise ValueError(f"unknown normalization: {normalization!r}")


def haar_forward_rows(w: np.ndarray, normalization: str = "paper") -> HaarBands:
    """Transform each row: lo_k and hi_k from the column pair (2k, 2k+1)."""
    _check_normalization(normalization)
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] < 2:
        raise DegenerateInputError("haar_forward_rows needs at least 2 columns")
    m = w.shape[1]
    pairs = m // 2
    even = w[:, 0 : 2 * pairs : 2]
    odd = w[:, 1 : 2 * pairs : 2]
    if normalization == "paper":
        lo = 0.5 * (even + odd)
        hi = 0.5 * (even - odd)
    else:
        lo = (even + odd) / _SQRT2
        hi = (even - odd) / _SQRT2
    leftover = w[:, -1].copy() if m % 2 else None
    return HaarBands(lo, hi, leftover, "rows", m, normalization)


def haar_inverse_rows(b: HaarBands) -> np.ndarray:
    """Exact inverse of haar_forward_rows."""
    if b.axis != "rows":
        raise InconsistencyError(f"expected axis='rows', got {b.axis!r}")
    if b.lo.shape != b.hi.shape:
        raise InconsistencyError(
            f"subband shapes differ: {b.lo.shape} vs {b.hi.shape}"
        )
    odd_len = b.original_len % 2 == 1
    if odd_len != (b.leftover is not None):
        raise InconsistencyError("leftover presence does not match original_len")
    rows, pairs = b.lo.shape
    if 2 * pairs + int(odd_len) != b.original_len:
        raise InconsistencyError("subband width does not match original_len")
    w = np.empty((rows, b.original_len), dtype=np.float64)
    if b.normalization == "paper":
        w[:, 0 : 2 * pairs : 2] = b.lo + b.hi
        w[:, 1 : 2 * pairs : 2] = b.lo - b.hi
    else:
        w[:, 0 : 2 * pairs : 2] = (b.lo + b.hi) / _SQRT2
        w[:, 1 : 2 * pairs : 2] = (b.lo - b.hi) / _SQRT2
    if odd_len:
        w[:, -1] = b.leftover
    return w


def haar_forward_cols(w: np.ndarray, normalization: str = "paper") -> HaarBands:
    """Column-wise transform: pairs adjacent rows for each fixed column."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] < 2:
        raise DegenerateInputError("haar_forward_cols needs at least 2 rows")
    rb = haar_forward_rows(w.T, normalization)
    leftover = None if rb.leftover is None else rb.leftover.copy()
    return HaarBands(rb.lo.T.copy(), rb.hi.T.copy(), leftover, "cols",
                     rb.original_len, normalization)


def haar_inverse_cols(b: HaarBands) -> np.ndarray:
    """Exact inverse of haar_forward_cols."""
    if b.axis != "cols":
        raise InconsistencyError(f"expected axis='cols', got {b.axis!r}")
    rb = HaarBands(b.lo.T, b.hi.T, b.leftover, "rows", b.original_len,
                   b.normalization)
    return haar_inverse_rows(rb).T.copy()


def highpass_energy(w: np.ndarray, ordering) -> float:
    """High-pass band energy of the reordered matrix, via the pairwise
    identity: one quarter of the summed squared distances between the
    columns inside each stride-2 window of the ordering.

    Matches ||(w P) H_hi||_F^2 with the fixed [1/2, -1/2] kernel; the odd
    trailing column, when present, sits outside every window.
    """
    w = np.asarray(w, dtype=np.float64)
    order = np.asarray(getattr(ordering, "order", ordering), dtype=np.int64)
    m = w.shape[1]
    if order.shape != (m,) or not np.array_equal(np.sort(order), np.arange(m)):
        raise PermutationError(f"not a permutation of {m} columns")
    pairs = m // 2
    left = w[:, order[0 : 2 * pairs : 2]]
    right = w[:, order[1 : 2 * pairs : 2]]
    return 0.25 * float(np.sum((left - right) ** 2))
