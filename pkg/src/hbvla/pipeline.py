"""Full layer quantization.

The layer pipeline: select salient columns from a (possibly reweighted)
calibration Hessian, fill them with neighbor averages, quantize the
filled matrix on the permuted Haar subbands with shared-mean groups,
then quantize the salient columns on the residual through a column-wise
Haar transform with full per-group metadata, and sum the two parts.

Group means and scales are rounded through IEEE half precision before
any reconstruction so that the in-memory result matches the packed file
bit for bit.
"""

import time
from dataclasses import asdict, dataclass

import numpy as np

from .binarize import (BandQuant, GroupQuantParams, quantize_band_grouped,
                       quantize_band_shared_mean, quantize_group)
from .errors import (ConfigurationError, DegenerateInputError,
                     DegeneratePartitionError, DimensionError, NumericalError)
from .haar import (HaarBands, haar_forward_cols, haar_forward_rows,
                   haar_inverse_cols, haar_inverse_rows)
from .permute import (ColumnOrdering, apply_ordering, greedy_pair_and_chain,
                      identity_ordering, invert_ordering, pairwise_distances)
from .saliency import SaliencyPartition, rectified_hessian, select_salient

_SEED_NORMS = ("l1", "l2")
_HESSIAN_MODES = ("standard", "rectified")
_NORMALIZATIONS = ("paper", "orthonormal")

# Exact mode (no neighbor pruning) is the default up to this many columns.
_EXACT_NEIGHBOR_LIMIT = 512


@dataclass(frozen=True)
class QuantConfig:
    """Knobs of the layer pipeline with their documented defaults."""

    candidate_budget: int = 40
    group_window: int = 128
    max_groups: int = 2
    seed_norm: str = "l2"
    hessian_mode: str = "rectified"
    normalization: str = "paper"
    k_neighbors: int | None = None
    damping: float = 0.01
    salient_bitplanes: int = 1
    # Minimum relative squared-error reduction a dense/sparse window split
    # must bring to pay for its extra metadata bits.  Generic Gaussian
    # windows top out near 0.72; genuine outlier windows clear 0.9.
    split_gain: float = 0.8
    permute: bool = True

    def validate(self) -> None:
        if min(self.candidate_budget, self.group_window,
               self.salient_bitplanes) < 1 or self.max_groups not in (1, 2):
            raise ConfigurationError("counts must be positive, max_groups 1 or 2")
        if self.seed_norm not in _SEED_NORMS:
            raise ConfigurationError(f"seed_norm must be one of {_SEED_NORMS}")
        if self.hessian_mode not in _HESSIAN_MODES:
            raise ConfigurationError(f"hessian_mode must be one of {_HESSIAN_MODES}")
        if self.normalization not in _NORMALIZATIONS:
            raise ConfigurationError(f"normalization must be one of {_NORMALIZATIONS}")
        if not 0.0 <= self.split_gain <= 1.0:
            raise ConfigurationError("split_gain must lie in [0, 1]")
        if self.damping < 0:
            raise ConfigurationError("damping must be nonnegative")


@dataclass
class BinarizedLayer:
    """Packed representation of one quantized layer.

    Non-salient subbands carry shared-mean groups; each salient bitplane
    holds the column-Haar bands of the residual (stored transposed, one
    row per salient column) plus the odd-row leftover.  ``reconstruct``
    is exact with respect to the stored parameters.
    """

    n: int
    m: int
    config: QuantConfig
    ordering: ColumnOrdering
    salient_indices: np.ndarray
    nonsalient_lo: BandQuant
    nonsalient_hi: BandQuant
    nonsalient_leftover: GroupQuantParams | None
    salient_planes: list[dict]
    avg_bits: float = 0.0

    def reconstruct_nonsalient(self) -> np.ndarray:
        lo = self.nonsalient_lo.reconstruct()
        hi = self.nonsalient_hi.reconstruct()
        leftover = None
        if self.nonsalient_leftover is not None:
            p = self.nonsalient_leftover
            leftover = p.mu + p.alpha * np.where(p.signs, 1.0, -1.0)
        bands = HaarBands(lo, hi, leftover, "rows", self.m,
                          self.config.normalization)
        permuted = haar_inverse_rows(bands)
        return apply_ordering(permuted, invert_ordering(self.ordering))

    def reconstruct_salient(self) -> np.ndarray:
        out = np.zeros((self.n, self.m), dtype=np.float64)
        if self.salient_indices.size == 0:
            return out
        acc = np.zeros((self.n, self.salient_indices.size), dtype=np.float64)
        for plane in self.salient_planes:
            acc += _reconstruct_plane(plane, self.n, self.salient_indices.size,
                                      self.config.normalization)
        out[:, self.salient_indices] = acc
        return out

    def reconstruct(self) -> np.ndarray:
        return self.reconstruct_nonsalient() + self.reconstruct_salient()


@dataclass(frozen=True)
class QuantReport:
    """Measured errors, bit accounting, and per-stage timings."""

    fro_error: float
    proxy_error: float | None
    avg_bits: float
    avg_bits_signs_only: float
    timing_ms: dict[str, float]
    config: dict
    weighted_proxy_error: float | None = None
    salient_count: int = 0


def _round_group_half(p: GroupQuantParams) -> GroupQuantParams:
    return GroupQuantParams(float(np.float16(p.mu)), float(np.float16(p.alpha)),
                            p.signs)


def _dequantize_scalar_group(p: GroupQuantParams) -> np.ndarray:
    return p.mu + p.alpha * np.where(p.signs, 1.0, -1.0)


def _reconstruct_plane(plane: dict, n: int, k: int, normalization: str):
    leftover = None
    if plane["leftover"] is not None:
        leftover = _dequantize_scalar_group(plane["leftover"])
    if plane["lo"] is None:  # single-row layer: leftover carries everything
        return leftover[None, :]
    lo = plane["lo"].reconstruct().T
    hi = plane["hi"].reconstruct().T
    bands = HaarBands(lo, hi, leftover, "cols", n, normalization)
    return haar_inverse_cols(bands)


def fill_salient_columns(w: np.ndarray, part: SaliencyPartition) -> np.ndarray:
    """Replace each salient column by the average of its flanking
    non-salient neighbors (single neighbor at the boundary)."""
    w = np.asarray(w, dtype=np.float64)
    if part.salient.size == 0:
        return w.copy()
    nonsal = part.nonsalient
    if nonsal.size == 0:
        raise DegeneratePartitionError("every column is salient")
    out = w.copy()
    pos = np.searchsorted(nonsal, part.salient)
    for s, p in zip(part.salient, pos):
        left = nonsal[p - 1] if p > 0 else None
        right = nonsal[p] if p < nonsal.size else None
        if left is not None and right is not None:
            out[:, s] = 0.5 * (w[:, left] + w[:, right])
        elif left is not None:
            out[:, s] = w[:, left]
        else:
            out[:, s] = w[:, right]
    return out


def quantize_nonsalient(w_filled: np.ndarray, cfg: QuantConfig):
    """Permute -> row-Haar -> shared-mean group binarization -> invert.

    Returns the dense reconstruction and the stored parts (ordering, two
    band quantizations, odd-column leftover group).
    """
    w_filled = np.asarray(w_filled, dtype=np.float64)
    n, m = w_filled.shape
    if m < 2:
        raise DegenerateInputError("need at least 2 columns")
    if cfg.permute:
        if cfg.seed_norm == "l2":
            norms = np.linalg.norm(w_filled, axis=0)
        else:
            norms = np.sum(np.abs(w_filled), axis=0)
        k = cfg.k_neighbors
        if k is None and m > _EXACT_NEIGHBOR_LIMIT:
            k = min(32, m - 1)
        table = pairwise_distances(w_filled, k)
        ordering = greedy_pair_and_chain(table, norms)
    else:
        ordering = identity_ordering(m)
    permuted = apply_ordering(w_filled, ordering)
    bands = haar_forward_rows(permuted, cfg.normalization)
    lo_q = quantize_band_shared_mean(bands.lo, cfg.group_window, cfg.max_groups,
                                     cfg.split_gain).round_params_half()
    hi_q = quantize_band_shared_mean(bands.hi, cfg.group_window, cfg.max_groups,
                                     cfg.split_gain).round_params_half()
    leftover_q = None
    leftover_vals = None
    if bands.leftover is not None:
        leftover_q = _round_group_half(quantize_group(bands.leftover))
        leftover_vals = _dequantize_scalar_group(leftover_q)
    rebuilt = HaarBands(lo_q.reconstruct(), hi_q.reconstruct(), leftover_vals,
                        "rows", m, cfg.normalization)
    what = apply_ordering(haar_inverse_rows(rebuilt), invert_ordering(ordering))
    return what, ordering, lo_q, hi_q, leftover_q


def quantize_salient_residual(w: np.ndarray, what_nonsal: np.ndarray,
                              part: SaliencyPartition, cfg: QuantConfig):
    """Refine salient columns on the residual via a column-wise Haar
    transform with per-group metadata; repeats for extra bitplanes."""
    n, m = np.shape(w)
    what_sal = np.zeros((n, m), dtype=np.float64)
    planes: list[dict] = []
    if part.salient.size == 0:
        return what_sal, planes
    current = (np.asarray(w, dtype=np.float64)
               - what_nonsal)[:, part.salient]
    acc = np.zeros_like(current)
    for _ in range(cfg.salient_bitplanes):
        if n >= 2:
            cb = haar_forward_cols(current, cfg.normalization)
            lo_q = quantize_band_grouped(cb.lo.T, cfg.group_window,
                                         cfg.max_groups,
                                         cfg.split_gain).round_params_half()
            hi_q = quantize_band_grouped(cb.hi.T, cfg.group_window,
                                         cfg.max_groups,
                                         cfg.split_gain).round_params_half()
            leftover_q = None
            if cb.leftover is not None:
                leftover_q = _round_group_half(quantize_group(cb.leftover))
            plane = {"lo": lo_q, "hi": hi_q, "leftover": leftover_q}
        else:
            plane = {"lo": None, "hi": None,
                     "leftover": _round_group_half(quantize_group(current[0]))}
        recon = _reconstruct_plane(plane, n, part.salient.size,
                                   cfg.normalization)
        planes.append(plane)
        acc += recon
        current = current - recon
    what_sal[:, part.salient] = acc
    return what_sal, planes


def quantize_layer(w: np.ndarray, calib: np.ndarray | None = None,
                   importance: np.ndarray | None = None,
                   cfg: QuantConfig | None = None):
    """Quantize one weight matrix; returns (BinarizedLayer, QuantReport).

    ``calib`` is a columns-are-tokens activation matrix used for the
    saliency Hessian and the output-proxy error; ``importance`` supplies
    per-token weights for the rectified Hessian mode.
    """
    cfg = cfg if cfg is not None else QuantConfig()
    cfg.validate()
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] < 2 or w.shape[0] < 1:
        raise DegenerateInputError(f"weight matrix must be n x m with m >= 2, "
                                   f"got shape {np.shape(w)}")
    if not np.all(np.isfinite(w)):
        raise NumericalError("weight matrix contains non-finite entries")
    n, m = w.shape
    timing: dict[str, float] = {}

    t = time.perf_counter()
    if calib is None:
        if cfg.hessian_mode == "rectified":
            raise ConfigurationError(
                "hessian_mode='rectified' needs calibration activations; "
                "pass calib or choose hessian_mode='standard'")
        hess = None
    else:
        calib = np.asarray(calib, dtype=np.float64)
        if calib.ndim != 2 or calib.shape[0] != m:
            raise DimensionError(
                f"calib must be {m} x N to match the weight columns, "
                f"got {calib.shape}")
        if not np.all(np.isfinite(calib)):
            raise NumericalError("calibration matrix contains non-finite entries")
        s = None
        if cfg.hessian_mode == "rectified" and importance is not None:
            s = np.asarray(importance, dtype=np.float64).ravel()
        hess = rectified_hessian(calib, s, cfg.damping)
    part = select_salient(w, hess, min(cfg.candidate_budget, m))
    timing["saliency"] = (time.perf_counter() - t) * 1e3

    t = time.perf_counter()
    filled = fill_salient_columns(w, part)
    timing["fill"] = (time.perf_counter() - t) * 1e3

    t = time.perf_counter()
    what_ns, ordering, lo_q, hi_q, leftover_q = quantize_nonsalient(filled, cfg)
    timing["nonsalient"] = (time.perf_counter() - t) * 1e3

    t = time.perf_counter()
    what_sal, planes = quantize_salient_residual(w, what_ns, part, cfg)
    timing["salient"] = (time.perf_counter() - t) * 1e3

    layer = BinarizedLayer(n, m, cfg, ordering, part.salient, lo_q, hi_q,
                           leftover_q, planes)
    layer.avg_bits = bit_budget(layer)

    what = what_ns + what_sal
    diff = w - what
    fro = float(np.sqrt(np.sum(diff * diff)))
    proxy = weighted_proxy = None
    if calib is not None:
        out_err = diff @ calib
        proxy = float(np.sqrt(np.sum(out_err * out_err)))
        if importance is not None:
            scaled = out_err * np.sqrt(np.asarray(importance,
                                                  dtype=np.float64).ravel())
            weighted_proxy = float(np.sqrt(np.sum(scaled * scaled)))
    breakdown = bit_breakdown(layer)
    report = QuantReport(fro_error=fro, proxy_error=proxy,
                         avg_bits=layer.avg_bits,
                         avg_bits_signs_only=breakdown["signs"] / (n * m),
                         timing_ms=timing, config=asdict(cfg),
                         weighted_proxy_error=weighted_proxy,
                         salient_count=int(part.salient.size))
    return layer, report


def index_bits(m: int) -> int:
    """Bits needed to store one column index of an m-column layer."""
    return max(1, (m - 1).bit_length())


def _window_lengths(width: int, window: int) -> list[int]:
    return [min(window, width - lo) for lo in range(0, width, window)]


def _band_bits(bq: BandQuant, max_groups: int) -> int:
    """Exact payload bits of one band section (mirrors the serializer)."""
    rows, width = bq.signs.shape
    nwin = bq.split.shape[1]
    lens = _window_lengths(width, bq.window)
    bits = 16 * rows * nwin  # alpha_dense
    if bq.kind == "shared":
        bits += 16 * rows  # shared mu
    else:
        bits += 16 * rows * nwin  # mu_dense
    if max_groups == 2:
        any_split = bq.split.any(axis=1)
        bits += rows  # any-split flag per row
        bits += int(any_split.sum()) * nwin  # per-window flags where needed
        per_split = 16 + (16 if bq.kind == "grouped" else 0)
        for wi in range(nwin):
            n_split = int(bq.split[:, wi].sum())
            bits += n_split * (per_split + lens[wi])
    bits += rows * width  # signs
    return bits


def bit_breakdown(layer: BinarizedLayer) -> dict[str, int]:
    """Exact payload bit counts per section of the packed format."""
    cfg = layer.config
    k = int(layer.salient_indices.size)
    counts = {
        "ordering": layer.m * index_bits(layer.m),
        "salient_indices": 32 * k,
        "nonsalient_bands": (_band_bits(layer.nonsalient_lo, cfg.max_groups)
                             + _band_bits(layer.nonsalient_hi, cfg.max_groups)),
        "salient_residual": 0,
        "leftover": 0,
    }
    for plane in layer.salient_planes:
        for key in ("lo", "hi"):
            if plane[key] is not None:
                counts["salient_residual"] += _band_bits(plane[key],
                                                         cfg.max_groups)
        if plane["leftover"] is not None:
            counts["salient_residual"] += 32 + k
    if layer.nonsalient_leftover is not None:
        counts["leftover"] = 32 + layer.n
    counts["signs"] = (layer.nonsalient_lo.signs.size
                       + layer.nonsalient_hi.signs.size
                       + sum(p["lo"].signs.size + p["hi"].signs.size
                             for p in layer.salient_planes
                             if p["lo"] is not None)
                       + sum(int(p["leftover"].signs.size)
                             for p in layer.salient_planes
                             if p["leftover"] is not None)
                       + (layer.n if layer.nonsalient_leftover is not None else 0))
    return counts


def bit_budget(layer: BinarizedLayer) -> float:
    """Average serialized payload bits per weight (header excluded)."""
    counts = bit_breakdown(layer)
    total = (counts["ordering"] + counts["salient_indices"]
             + counts["nonsalient_bands"] + counts["salient_residual"]
             + counts["leftover"])
    return total / float(layer.n * layer.m)


# Serialization lives in hbq.py; re-exported here for the public API.
def serialize_layer(layer: BinarizedLayer) -> bytes:
    from .hbq import serialize_layer as _impl
    return _impl(layer)


def deserialize_layer(data: bytes) -> BinarizedLayer:
    from .hbq import deserialize_layer as _impl
    return _impl(data)
