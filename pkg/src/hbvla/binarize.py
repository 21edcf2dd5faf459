"""Group-wise 1-bit quantization primitive.

A group of coefficients u is represented as mu + alpha * sign(u - mu),
one sign bit per coefficient.  For a fixed sign pattern the L2-optimal
scale is alpha = mean|u - mu|.  Within a frequency band, each window of
coefficients can be split into a dense and a sparse group by deviation
magnitude when the split reduces squared error enough; non-salient rows
share a single mu per row and band to save metadata bits.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateInputError


@dataclass(frozen=True)
class GroupSpec:
    """Membership of one quantization group inside a band row."""

    band: str
    row: int
    member_indices: np.ndarray
    shared_mean: bool = False


@dataclass(frozen=True)
class GroupQuantParams:
    """Stored parameters of one group: dequantized value of member j is
    mu + alpha * (+1 if signs[j] else -1)."""

    mu: float
    alpha: float
    signs: np.ndarray


def quantize_group(u, mu_override: float | None = None) -> GroupQuantParams:
    """Centered-sign quantization of one group; sign(0) counts as +1."""
    u = np.asarray(u, dtype=np.float64)
    if u.size == 0:
        raise DegenerateInputError("empty group")
    mu = float(np.mean(u)) if mu_override is None else float(mu_override)
    dev = u - mu
    signs = dev >= 0.0
    alpha = float(np.mean(np.abs(dev)))
    return GroupQuantParams(mu, alpha, signs)


def dequantize_group(p: GroupQuantParams) -> np.ndarray:
    return p.mu + p.alpha * np.where(p.signs, 1.0, -1.0)


def group_sse(u, mu_override: float | None = None) -> float:
    """Squared reconstruction error of quantize_group on u."""
    u = np.asarray(u, dtype=np.float64)
    mu = float(np.mean(u)) if mu_override is None else float(mu_override)
    dev = u - mu
    return float(np.sum(dev * dev) - np.sum(np.abs(dev)) ** 2 / u.size)


def split_band(u, max_groups: int = 2, *, mu_override: float | None = None,
               min_gain: float = 0.0, band: str = "lo",
               row: int = 0) -> list[GroupSpec]:
    """Partition one window of coefficients into at most two groups.

    Coefficients are ranked by deviation from the window center (the
    shared mean when given, the window mean otherwise); every break-point
    between a low-deviation dense group and a high-deviation sparse group
    is evaluated and the best split is kept only when it removes at least
    ``min_gain`` of the single-group squared error.
    """
    u = np.asarray(u, dtype=np.float64)
    n = u.size
    if n == 0:
        raise DegenerateInputError("empty band window")
    if max_groups not in (1, 2):
        raise ValueError(f"max_groups must be 1 or 2, got {max_groups}")
    shared = mu_override is not None
    whole = [GroupSpec(band, row, np.arange(n, dtype=np.int64), shared)]
    if max_groups == 1 or n == 1:
        return whole
    center = float(np.mean(u)) if mu_override is None else float(mu_override)
    order = np.argsort(np.abs(u - center), kind="stable")
    single = group_sse(u, mu_override)
    if single <= 0.0:
        return whole
    best_total = np.inf
    best_k = 0
    # Ties go to the largest dense set: the sparse side should carry as
    # few coefficients as possible.
    for k in range(1, n):
        dense = order[:k]
        sparse = order[k:]
        total = group_sse(u[dense], mu_override) + group_sse(u[sparse], mu_override)
        if total <= best_total:
            best_total = total
            best_k = k
    if not best_total < (1.0 - min_gain) * single:
        return whole
    dense_idx = np.sort(order[:best_k])
    sparse_idx = np.sort(order[best_k:])
    return [GroupSpec(band, row, dense_idx, shared),
            GroupSpec(band, row, sparse_idx, shared)]


def dequantize_band(specs: list[GroupSpec], params: list[GroupQuantParams],
                    width: int | None = None) -> np.ndarray:
    """Scatter group reconstructions back into a band row."""
    if len(specs) != len(params):
        raise ValueError("specs and params differ in length")
    if width is None:
        width = max(int(s.member_indices.max()) for s in specs) + 1
    out = np.zeros(width, dtype=np.float64)
    for spec, p in zip(specs, params):
        out[spec.member_indices] = dequantize_group(p)
    return out


@dataclass(frozen=True)
class BandQuant:
    """Vectorized group parameters for one band of shape (rows, width).

    ``kind`` is "shared" (one mu per row, used for non-salient weights) or
    "grouped" (own mu per group).  Sparse-side parameters are only
    meaningful where ``split`` is set; elsewhere they are zero.
    ``membership`` marks sparse-group coefficients.
    """

    kind: str
    window: int
    width: int
    signs: np.ndarray
    split: np.ndarray
    membership: np.ndarray
    alpha_dense: np.ndarray
    alpha_sparse: np.ndarray
    shared_mu: np.ndarray | None = None
    mu_dense: np.ndarray | None = None
    mu_sparse: np.ndarray | None = None

    @property
    def rows(self) -> int:
        return self.signs.shape[0]

    @property
    def n_windows(self) -> int:
        return self.split.shape[1]

    def round_params_half(self) -> "BandQuant":
        """Round every stored float parameter through IEEE half precision,
        matching what the packed file format keeps."""

        def h(a):
            return None if a is None else np.float16(a).astype(np.float64)

        return replace(self, alpha_dense=h(self.alpha_dense),
                       alpha_sparse=h(self.alpha_sparse),
                       shared_mu=h(self.shared_mu), mu_dense=h(self.mu_dense),
                       mu_sparse=h(self.mu_sparse))

    def reconstruct(self) -> np.ndarray:
        """Dequantize the whole band."""
        rows, width = self.signs.shape
        alpha = np.empty((rows, width), dtype=np.float64)
        mu = np.empty((rows, width), dtype=np.float64)
        for wi, lo in enumerate(range(0, width, self.window)):
            hi = min(lo + self.window, width)
            sel = self.membership[:, lo:hi] & self.split[:, wi:wi + 1]
            alpha[:, lo:hi] = np.where(sel, self.alpha_sparse[:, wi:wi + 1],
                                       self.alpha_dense[:, wi:wi + 1])
            if self.kind == "grouped":
                mu[:, lo:hi] = np.where(sel, self.mu_sparse[:, wi:wi + 1],
                                        self.mu_dense[:, wi:wi + 1])
        if self.kind == "shared":
            mu = self.shared_mu[:, None]
        return mu + alpha * np.where(self.signs, 1.0, -1.0)


def quantize_band_shared_mean(band: np.ndarray, window: int = 128,
                              max_groups: int = 2,
                              min_gain: float = 0.0) -> BandQuant:
    """Quantize a (rows, width) band with one shared mu per row.

    Dense/sparse splits are searched per window around the shared mu; the
    break-point sweep runs on deviation-sorted prefix sums, vectorized
    across rows.
    """
    band = np.asarray(band, dtype=np.float64)
    if band.ndim != 2 or band.size == 0:
        raise DegenerateInputError("band must be a nonempty 2-D array")
    rows, width = band.shape
    nwin = (width + window - 1) // window
    mu = band.mean(axis=1)
    dev = band - mu[:, None]
    signs = dev >= 0.0
    adev = np.abs(dev)
    split = np.zeros((rows, nwin), dtype=bool)
    membership = np.zeros((rows, width), dtype=bool)
    alpha_dense = np.zeros((rows, nwin), dtype=np.float64)
    alpha_sparse = np.zeros((rows, nwin), dtype=np.float64)
    for wi, lo in enumerate(range(0, width, window)):
        hi = min(lo + window, width)
        a = adev[:, lo:hi]
        length = hi - lo
        if max_groups == 1 or length == 1:
            alpha_dense[:, wi] = a.mean(axis=1)
            continue
        order = np.argsort(a, axis=1, kind="stable")
        s = np.take_along_axis(a, order, axis=1)
        cum1 = np.cumsum(s, axis=1)
        cum2 = np.cumsum(s * s, axis=1)
        tot1 = cum1[:, -1]
        tot2 = cum2[:, -1]
        sse_single = tot2 - tot1 * tot1 / length
        ks = np.arange(1, length, dtype=np.float64)
        sse_d = cum2[:, :-1] - cum1[:, :-1] ** 2 / ks
        rem1 = tot1[:, None] - cum1[:, :-1]
        rem2 = tot2[:, None] - cum2[:, :-1]
        sse_s = rem2 - rem1 * rem1 / (length - ks)
        total = sse_d + sse_s
        # Last argmin: ties resolve toward the smallest sparse group.
        best = total.shape[1] - 1 - np.argmin(total[:, ::-1], axis=1)
        best_total = total[np.arange(rows), best]
        best_k = best + 1
        accept = best_total < (1.0 - min_gain) * sse_single
        split[:, wi] = accept
        rank = np.empty_like(order)
        np.put_along_axis(rank, order,
                          np.broadcast_to(np.arange(length), (rows, length)),
                          axis=1)
        membership[:, lo:hi] = accept[:, None] & (rank >= best_k[:, None])
        dense1 = np.where(accept, cum1[np.arange(rows), best], tot1)
        dense_n = np.where(accept, best_k, length)
        alpha_dense[:, wi] = dense1 / dense_n
        with np.errstate(invalid="ignore", divide="ignore"):
            sp = (tot1 - cum1[np.arange(rows), best]) / (length - best_k)
        alpha_sparse[:, wi] = np.where(accept, sp, 0.0)
    return BandQuant("shared", window, width, signs, split, membership,
                     alpha_dense, alpha_sparse, shared_mu=mu)


def quantize_band_grouped(band: np.ndarray, window: int = 128,
                          max_groups: int = 2,
                          min_gain: float = 0.0) -> BandQuant:
    """Quantize a (rows, width) band with an own mu per group.

    Used for the salient residual, where full per-group metadata is paid
    for.  Membership candidates are ranked by deviation from the window
    mean; each side of a candidate split is scored with its own mean.
    """
    band = np.asarray(band, dtype=np.float64)
    if band.ndim != 2 or band.size == 0:
        raise DegenerateInputError("band must be a nonempty 2-D array")
    rows, width = band.shape
    nwin = (width + window - 1) // window
    split = np.zeros((rows, nwin), dtype=bool)
    membership = np.zeros((rows, width), dtype=bool)
    signs = np.zeros((rows, width), dtype=bool)
    alpha_dense = np.zeros((rows, nwin), dtype=np.float64)
    alpha_sparse = np.zeros((rows, nwin), dtype=np.float64)
    mu_dense = np.zeros((rows, nwin), dtype=np.float64)
    mu_sparse = np.zeros((rows, nwin), dtype=np.float64)
    for wi, lo in enumerate(range(0, width, window)):
        hi = min(lo + window, width)
        u = band[:, lo:hi]
        length = hi - lo
        if max_groups == 2 and length > 1:
            wmu = u.mean(axis=1)
            order = np.argsort(np.abs(u - wmu[:, None]), axis=1, kind="stable")
            s = np.take_along_axis(u, order, axis=1)
            cum1 = np.cumsum(s, axis=1)
            cum2 = np.cumsum(s * s, axis=1)
            tot1, tot2 = cum1[:, -1], cum2[:, -1]
            ks = np.arange(1, length, dtype=np.float64)
            mu_d = cum1[:, :-1] / ks
            mu_s = (tot1[:, None] - cum1[:, :-1]) / (length - ks)
            # Absolute deviations from each candidate group mean; the mean
            # depends on the break-point, so no prefix trick applies here.
            diff_d = np.abs(s[:, None, :] - mu_d[:, :, None])
            diff_s = np.abs(s[:, None, :] - mu_s[:, :, None])
            pos = np.arange(length)
            dense_mask = pos[None, :] < ks[:, None]
            abs_d = np.sum(diff_d * dense_mask[None, :, :], axis=2)
            abs_s = np.sum(diff_s * ~dense_mask[None, :, :], axis=2)
            sse_d = cum2[:, :-1] - cum1[:, :-1] ** 2 / ks - abs_d ** 2 / ks
            rem1 = tot1[:, None] - cum1[:, :-1]
            rem2 = tot2[:, None] - cum2[:, :-1]
            sse_s = rem2 - rem1 ** 2 / (length - ks) - abs_s ** 2 / (length - ks)
            total = sse_d + sse_s
            best = total.shape[1] - 1 - np.argmin(total[:, ::-1], axis=1)
            best_total = total[np.arange(rows), best]
            best_k = best + 1
            adev_all = np.abs(u - wmu[:, None])
            sse_single = (tot2 - tot1 ** 2 / length
                          - np.sum(adev_all, axis=1) ** 2 / length)
            accept = best_total < (1.0 - min_gain) * sse_single
            split[:, wi] = accept
            rank = np.empty_like(order)
            np.put_along_axis(rank, order,
                              np.broadcast_to(pos, (rows, length)), axis=1)
            membership[:, lo:hi] = accept[:, None] & (rank >= best_k[:, None])
        sparse_sel = membership[:, lo:hi]
        dense_sel = ~sparse_sel
        n_dense = dense_sel.sum(axis=1)
        n_sparse = sparse_sel.sum(axis=1)
        mu_d_final = np.sum(u * dense_sel, axis=1) / n_dense
        with np.errstate(invalid="ignore", divide="ignore"):
            mu_s_final = np.where(n_sparse > 0,
                                  np.sum(u * sparse_sel, axis=1)
                                  / np.maximum(n_sparse, 1), 0.0)
        mu_dense[:, wi] = mu_d_final
        mu_sparse[:, wi] = mu_s_final
        mu_coeff = np.where(sparse_sel, mu_s_final[:, None], mu_d_final[:, None])
        dev = u - mu_coeff
        signs[:, lo:hi] = dev >= 0.0
        adev = np.abs(dev)
        alpha_dense[:, wi] = np.sum(adev * dense_sel, axis=1) / n_dense
        with np.errstate(invalid="ignore", divide="ignore"):
            alpha_sparse[:, wi] = np.where(
                n_sparse > 0,
                np.sum(adev * sparse_sel, axis=1) / np.maximum(n_sparse, 1),
                0.0)
    return BandQuant("grouped", window, width, signs, split, membership,
                     alpha_dense, alpha_sparse, mu_dense=mu_dense,
                     mu_sparse=mu_sparse)
