"""Policy-aware saliency: block probe, analytic gradients, token
importance, rectified Hessian, salient column selection, and the
Hessian-guided closed-form row update.

The probe block is a residual multi-head self-attention module
z = x + MHSA(x) over token columns (x is d x N, one column per token).
Binarization-induced block loss ||z - z_hat||_F^2 is backpropagated by
hand to the four projection outputs; per-token gradient norms give a
diagonal reweighting of the calibration Hessian X X^T so that saliency
follows functional impact instead of raw activation magnitude.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .binarize import group_sse
from .errors import (ConfigurationError, DegenerateInputError, DimensionError,
                     NumericalError, SingularHessianError)
from .tensor import make_rng

PROJECTIONS = ("Q", "K", "V", "O")


@dataclass(frozen=True)
class AttentionBlockWeights:
    """Square projection weights of one residual attention block."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    heads: int = 1

    def __post_init__(self):
        d = self.wq.shape[0]
        for name in ("wq", "wk", "wv", "wo"):
            w = getattr(self, name)
            if w.shape != (d, d):
                raise DimensionError(f"{name} must be {d}x{d}, got {w.shape}")
        if self.heads < 1 or d % self.heads:
            raise DimensionError(f"d={d} not divisible by heads={self.heads}")

    @property
    def d(self) -> int:
        return self.wq.shape[0]


def _softmax_cols(s: np.ndarray) -> np.ndarray:
    e = np.exp(s - s.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


def _forward(wts: AttentionBlockWeights, x: np.ndarray, overrides=None):
    """Residual attention forward pass; entries of ``overrides`` replace
    the corresponding projection outputs (used for probing)."""
    ov = overrides or {}
    d = wts.d
    if x.ndim != 2 or x.shape[0] != d:
        raise DimensionError(f"x must be {d}xN, got {x.shape}")
    yq = ov.get("Q", wts.wq @ x)
    yk = ov.get("K", wts.wk @ x)
    yv = ov.get("V", wts.wv @ x)
    dh = d // wts.heads
    scale = 1.0 / np.sqrt(dh)
    internals = []
    concat = np.empty_like(yv)
    for i in range(wts.heads):
        sl = slice(i * dh, (i + 1) * dh)
        q, k, v = yq[sl], yk[sl], yv[sl]
        s = (k.T @ q) * scale
        a = _softmax_cols(s)
        concat[sl] = v @ a
        internals.append((q, k, v, a))
    yo = ov.get("O", wts.wo @ concat)
    z = x + yo
    cache = {"Q": yq, "K": yk, "V": yv, "O": yo}
    return z, cache, internals, concat


def attention_forward(wts: AttentionBlockWeights, x: np.ndarray):
    """Run the block; returns the output z = x + MHSA(x) and the four
    projection outputs keyed by Q/K/V/O."""
    z, cache, _, _ = _forward(wts, x)
    return z, cache


def block_loss(z: np.ndarray, z_hat: np.ndarray) -> float:
    """Squared Frobenius deviation between clean and binarized outputs."""
    if z.shape != z_hat.shape:
        raise DimensionError(f"shape mismatch: {z.shape} vs {z_hat.shape}")
    diff = z - z_hat
    return float(np.sum(diff * diff))


def block_output_gradient(z: np.ndarray, z_hat: np.ndarray) -> np.ndarray:
    """Gradient of block_loss with respect to the block output z."""
    return 2.0 * (z - z_hat)


def projection_gradients(wts: AttentionBlockWeights,
                         wts_quantized: AttentionBlockWeights,
                         x: np.ndarray) -> dict[str, np.ndarray]:
    """Analytic gradients of the block loss at each full-precision
    projection output, via backprop through residual add, output
    projection, softmax attention, and the Q/K/V projections."""
    z, cache, internals, _ = _forward(wts, x)
    z_hat, _, _, _ = _forward(wts_quantized, x)
    go = block_output_gradient(z, z_hat)
    d = wts.d
    dh = d // wts.heads
    scale = 1.0 / np.sqrt(dh)
    dc = wts.wo.T @ go
    gq = np.empty_like(cache["Q"])
    gk = np.empty_like(cache["K"])
    gv = np.empty_like(cache["V"])
    for i, (q, k, v, a) in enumerate(internals):
        sl = slice(i * dh, (i + 1) * dh)
        dci = dc[sl]
        gv[sl] = dci @ a.T
        da = v.T @ dci
        ds = a * (da - np.sum(a * da, axis=0, keepdims=True))
        gq[sl] = (k @ ds) * scale
        gk[sl] = (q @ ds.T) * scale
    grads = {"Q": gq, "K": gk, "V": gv, "O": go}
    for p, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient at projection {p}")
    return grads


def finite_difference_check(wts: AttentionBlockWeights,
                            wts_quantized: AttentionBlockWeights,
                            x: np.ndarray, samples_per_projection: int = 5,
                            h: float = 1e-5, seed: int = 0) -> float:
    """Central-difference spot check of projection_gradients.

    Perturbs sampled entries of each projection output and recomputes the
    block downstream of it; returns the worst relative error.
    """
    z_hat, _, _, _ = _forward(wts_quantized, x)
    _, cache, _, _ = _forward(wts, x)
    grads = projection_gradients(wts, wts_quantized, x)
    rng = make_rng(seed)
    worst = 0.0
    for p in PROJECTIONS:
        y = cache[p]
        # Relative error is measured against the projection's gradient
        # scale so near-zero entries do not dominate the report.
        floor = max(1e-3 * float(np.max(np.abs(grads[p]))), 1e-12)
        flat = rng.choice(y.size, size=min(samples_per_projection, y.size),
                          replace=False)
        for f in flat:
            i, t = np.unravel_index(f, y.shape)
            for sgn, store in ((1.0, "plus"), (-1.0, "minus")):
                yp = y.copy()
                yp[i, t] += sgn * h
                zp, _, _, _ = _forward(wts, x, {p: yp})
                if store == "plus":
                    lp = block_loss(zp, z_hat)
                else:
                    lm = block_loss(zp, z_hat)
            fd = (lp - lm) / (2.0 * h)
            an = grads[p][i, t]
            rel = abs(an - fd) / max(abs(fd), floor)
            worst = max(worst, rel)
    return worst


@dataclass(frozen=True)
class TokenImportance:
    """Per-token nonnegative weights for one projection: column gradient
    norms scaled by 1/d_p."""

    projection: str
    a: np.ndarray


def token_importance(g: np.ndarray, projection: str = "") -> TokenImportance:
    d_p = g.shape[0]
    if d_p == 0:
        raise DegenerateInputError("empty gradient matrix")
    a = np.linalg.norm(g, axis=0) / d_p
    return TokenImportance(projection, a)


@dataclass(frozen=True)
class RectifiedHessian:
    """Damped calibration Hessian; ``source`` records whether tokens were
    reweighted ("rectified") or aggregated uniformly ("standard")."""

    h: np.ndarray
    damping: float
    source: str


def rectified_hessian(x: np.ndarray, s: np.ndarray | None = None,
                      damping: float = 0.01) -> RectifiedHessian:
    """Token-weighted second-moment matrix sum_t s_t x_t x_t^T with
    mean-diagonal damping.  Uniform s reproduces the standard X X^T."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError("x must be 2-D (features x tokens)")
    if s is None:
        h = x @ x.T
        source = "standard"
    else:
        s = np.asarray(s, dtype=np.float64).ravel()
        if s.shape[0] != x.shape[1]:
            raise DimensionError(
                f"importance length {s.shape[0]} != token count {x.shape[1]}")
        if np.any(s < 0):
            raise ValueError("importance weights must be nonnegative")
        h = (x * s) @ x.T
        source = "rectified"
    h = 0.5 * (h + h.T)
    if damping > 0:
        h = h + damping * float(np.mean(np.diag(h))) * np.eye(h.shape[0])
    return RectifiedHessian(h, damping, source)


def _inverse_diagonal(h: np.ndarray) -> np.ndarray:
    try:
        cho = cho_factor(h, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularHessianError(f"Cholesky failed: {exc}") from exc
    return np.diag(cho_solve(cho, np.eye(h.shape[0])))


def column_scores(w: np.ndarray, hess: RectifiedHessian | None,
                  mode: str = "inv_diag") -> np.ndarray:
    """Per-column saliency: element scores w_ij^2 normalized by the
    Hessian, reduced over rows with an l2 norm.

    mode "inv_diag" divides by the squared inverse-Hessian diagonal (the
    error-compensation weighting); mode "diag" multiplies by the Hessian
    diagonal instead.  ``hess=None`` behaves like the identity Hessian.
    """
    w = np.asarray(w, dtype=np.float64)
    base = np.sqrt(np.sum(w ** 4, axis=0))
    if hess is None:
        return base
    if hess.h.shape[0] != w.shape[1]:
        raise DimensionError(
            f"Hessian is {hess.h.shape[0]}d, matrix has {w.shape[1]} columns")
    if mode == "inv_diag":
        return base / _inverse_diagonal(hess.h) ** 2
    if mode == "diag":
        return base * np.diag(hess.h)
    raise ConfigurationError(f"unknown score mode: {mode!r}")


@dataclass(frozen=True)
class SaliencyPartition:
    """Disjoint salient / non-salient column index sets."""

    salient: np.ndarray
    nonsalient: np.ndarray
    m: int
    candidate_budget: int


def centered_sign_probe(w: np.ndarray, salient: np.ndarray) -> float:
    """Cheap binarization surrogate: per row, one centered-sign group per
    column set; returns the Frobenius reconstruction error."""
    w = np.asarray(w, dtype=np.float64)
    m = w.shape[1]
    mask = np.zeros(m, dtype=bool)
    mask[salient] = True
    total = 0.0
    for sel in (mask, ~mask):
        if not sel.any():
            continue
        sub = w[:, sel]
        dev = sub - sub.mean(axis=1, keepdims=True)
        total += float(np.sum(dev * dev)
                       - np.sum(np.sum(np.abs(dev), axis=1) ** 2) / sel.sum())
    return float(np.sqrt(max(total, 0.0)))


def select_salient(w: np.ndarray, hess: RectifiedHessian | None,
                   candidate_budget: int = 40,
                   quant_probe=None) -> SaliencyPartition:
    """Two-stage salient column selection.

    Stage 1 ranks columns by column_scores and keeps the top
    ``candidate_budget`` as candidates.  Stage 2 sweeps even salient
    counts k over the ranked candidates and keeps the k whose probe
    reconstruction error is smallest (ties prefer smaller k).  At least
    two columns always stay non-salient.
    """
    w = np.asarray(w, dtype=np.float64)
    m = w.shape[1]
    if candidate_budget > m:
        raise ConfigurationError(f"budget {candidate_budget} > columns {m}")
    probe = quant_probe if quant_probe is not None else centered_sign_probe
    scores = column_scores(w, hess)
    ranked = np.lexsort((np.arange(m), -scores))
    k_max = min(candidate_budget, m - 2)
    best_k = 0
    best_err = np.inf
    for k in range(0, k_max + 1, 2):
        err = probe(w, np.sort(ranked[:k]))
        if err < best_err:
            best_err = err
            best_k = k
    salient = np.sort(ranked[:best_k]).astype(np.int64)
    mask = np.zeros(m, dtype=bool)
    mask[salient] = True
    return SaliencyPartition(salient, np.flatnonzero(~mask).astype(np.int64),
                             m, candidate_budget)


def obq_update(w_row: np.ndarray, q_index: int, quantized_value: float,
               x: np.ndarray, g: np.ndarray, r: np.ndarray,
               damping: float = 0.0) -> np.ndarray:
    """Closed-form row update that pins coordinate q to its quantized
    value while minimizing the importance-weighted output deviation
    ||(dw X - r) G^(1/2)||^2 with H_e = X G X^T.

    The returned update satisfies dw[q] + w[q] - w_hat[q] == 0 exactly.
    """
    w_row = np.asarray(w_row, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64).ravel()
    r = np.asarray(r, dtype=np.float64).ravel()
    d = w_row.size
    if x.shape[0] != d or x.shape[1] != g.size or r.size != g.size:
        raise DimensionError("inconsistent shapes for obq_update")
    if not 0 <= q_index < d:
        raise ConfigurationError(f"q_index {q_index} out of range")
    h = (x * g) @ x.T
    if damping > 0:
        h = h + damping * float(np.mean(np.diag(h))) * np.eye(d)
    try:
        cho = cho_factor(h, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularHessianError(f"H_e not positive definite: {exc}") from exc
    hinv = cho_solve(cho, np.eye(d))
    if hinv[q_index, q_index] <= 0:
        raise NumericalError("inverse Hessian diagonal not positive")
    target = quantized_value - w_row[q_index]
    base = (r * g) @ x.T @ hinv
    lam_half = (base[q_index] - target) / hinv[q_index, q_index]
    dw = base - lam_half * hinv[q_index]
    dw[q_index] = target
    return dw
