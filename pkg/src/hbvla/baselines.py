"""Reference quantizers the pipeline is benchmarked against."""

from dataclasses import replace

import numpy as np

from .pipeline import QuantConfig, quantize_layer


def baseline_plain_sign(w: np.ndarray) -> np.ndarray:
    """Row-wise scaled sign quantizer: alpha * sign(w), alpha = mean|w|."""
    w = np.asarray(w, dtype=np.float64)
    alpha = np.mean(np.abs(w), axis=1, keepdims=True)
    return alpha * np.where(w >= 0.0, 1.0, -1.0)


def plain_sign_avg_bits(n: int, m: int) -> float:
    """One sign per weight plus a 16-bit scale per row."""
    return (n * m + 16 * n) / float(n * m)


def baseline_haar_noperm(w: np.ndarray, calib=None, importance=None,
                         cfg: QuantConfig | None = None):
    """The full pipeline with the column ordering forced to identity."""
    cfg = cfg if cfg is not None else QuantConfig()
    return quantize_layer(w, calib, importance, replace(cfg, permute=False))
