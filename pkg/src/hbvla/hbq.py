"""Packed .hbq container for binarized layers.

Layout: fixed little-endian header (magic "HBQ1", version, dims, config
echo, salient count, payload bit count), one contiguous MSB-first
bitstream padded to a byte boundary, and a CRC32 trailer over header and
payload.  Payload sections in order: column ordering, salient indices,
non-salient bands (lo then hi), salient residual planes, odd-column
leftover.  The payload bit count equals the analytic bit budget exactly.
"""

import struct
import zlib

import numpy as np

from .binarize import BandQuant, GroupQuantParams
from .errors import FormatError
from .permute import ColumnOrdering
from .pipeline import (BinarizedLayer, QuantConfig, _window_lengths,
                       bit_budget, index_bits)

_MAGIC = b"HBQ1"
_VERSION = 1
_HEADER = struct.Struct("<4sHIIIIBBBBBBiddIQ")

_SEED_NORM_CODE = {"l1": 0, "l2": 1}
_HESSIAN_CODE = {"standard": 0, "rectified": 1}
_NORM_CODE = {"paper": 0, "orthonormal": 1}


class BitWriter:
    """MSB-first bit accumulator; chunks are packed once at the end."""

    def __init__(self):
        self._chunks: list[np.ndarray] = []
        self.bit_count = 0

    def write_bits(self, bits) -> None:
        arr = np.asarray(bits, dtype=np.uint8).ravel()
        self._chunks.append(arr)
        self.bit_count += arr.size

    def write_uint_array(self, values, nbits: int) -> None:
        values = np.asarray(values, dtype=np.uint64).ravel()
        shifts = np.arange(nbits - 1, -1, -1, dtype=np.uint64)
        bits = ((values[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
        self.write_bits(bits)

    def write_uint(self, value: int, nbits: int) -> None:
        self.write_uint_array(np.array([value]), nbits)

    def write_f16_array(self, values) -> None:
        u16 = np.asarray(values, dtype=np.float64).astype(np.float16)
        self.write_uint_array(u16.view(np.uint16), 16)

    def getvalue(self) -> bytes:
        if not self._chunks:
            return b""
        return np.packbits(np.concatenate(self._chunks)).tobytes()


class BitReader:
    """Cursor over an unpacked MSB-first bitstream."""

    def __init__(self, payload: bytes, bit_count: int):
        bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))
        if bits.size < bit_count:
            raise FormatError("payload shorter than declared bit count")
        self._bits = bits
        self._pos = 0
        self._limit = bit_count

    def read_bits(self, count: int) -> np.ndarray:
        if self._pos + count > self._limit:
            raise FormatError("payload truncated mid-section")
        out = self._bits[self._pos:self._pos + count]
        self._pos += count
        return out.astype(bool)

    def read_uint_array(self, count: int, nbits: int) -> np.ndarray:
        bits = self.read_bits(count * nbits).reshape(count, nbits)
        weights = 1 << np.arange(nbits - 1, -1, -1, dtype=np.uint64)
        return (bits.astype(np.uint64) * weights).sum(axis=1)

    def read_uint(self, nbits: int) -> int:
        return int(self.read_uint_array(1, nbits)[0])

    def read_f16_array(self, count: int) -> np.ndarray:
        u16 = self.read_uint_array(count, 16).astype(np.uint16)
        return u16.view(np.float16).astype(np.float64)

    def done(self) -> bool:
        return self._pos == self._limit


def _write_band(bw: BitWriter, bq: BandQuant, max_groups: int) -> None:
    rows, width = bq.signs.shape
    nwin = bq.split.shape[1]
    lens = _window_lengths(width, bq.window)
    if bq.kind == "shared":
        bw.write_f16_array(bq.shared_mu)
    else:
        bw.write_f16_array(bq.mu_dense)
    if max_groups == 2:
        any_split = bq.split.any(axis=1)
        bw.write_bits(any_split)
        if any_split.any():
            bw.write_bits(bq.split[any_split])
    bw.write_f16_array(bq.alpha_dense)
    for wi, lo in enumerate(range(0, width, bq.window)):
        sel = bq.split[:, wi]
        if not sel.any():
            continue
        if bq.kind == "grouped":
            bw.write_f16_array(bq.mu_sparse[sel, wi])
        bw.write_f16_array(bq.alpha_sparse[sel, wi])
        bw.write_bits(bq.membership[sel, lo:lo + lens[wi]])
    bw.write_bits(bq.signs)


def _read_band(br: BitReader, kind: str, rows: int, width: int, window: int,
               max_groups: int) -> BandQuant:
    nwin = (width + window - 1) // window
    lens = _window_lengths(width, window)
    shared_mu = mu_dense = mu_sparse = None
    if kind == "shared":
        shared_mu = br.read_f16_array(rows)
    else:
        mu_dense = br.read_f16_array(rows * nwin).reshape(rows, nwin)
        mu_sparse = np.zeros((rows, nwin), dtype=np.float64)
    split = np.zeros((rows, nwin), dtype=bool)
    if max_groups == 2:
        any_split = br.read_bits(rows)
        n_any = int(any_split.sum())
        if n_any:
            split[any_split] = br.read_bits(n_any * nwin).reshape(n_any, nwin)
    alpha_dense = br.read_f16_array(rows * nwin).reshape(rows, nwin)
    alpha_sparse = np.zeros((rows, nwin), dtype=np.float64)
    membership = np.zeros((rows, width), dtype=bool)
    for wi, lo in enumerate(range(0, width, window)):
        sel = split[:, wi]
        n_split = int(sel.sum())
        if not n_split:
            continue
        if kind == "grouped":
            mu_sparse[sel, wi] = br.read_f16_array(n_split)
        alpha_sparse[sel, wi] = br.read_f16_array(n_split)
        membership[sel, lo:lo + lens[wi]] = br.read_bits(
            n_split * lens[wi]).reshape(n_split, lens[wi])
    signs = br.read_bits(rows * width).reshape(rows, width)
    return BandQuant(kind, window, width, signs, split, membership,
                     alpha_dense, alpha_sparse, shared_mu=shared_mu,
                     mu_dense=mu_dense, mu_sparse=mu_sparse)


def _write_scalar_group(bw: BitWriter, p: GroupQuantParams) -> None:
    bw.write_f16_array([p.mu, p.alpha])
    bw.write_bits(p.signs)


def _read_scalar_group(br: BitReader, count: int) -> GroupQuantParams:
    mu, alpha = br.read_f16_array(2)
    signs = br.read_bits(count)
    return GroupQuantParams(float(mu), float(alpha), signs)


def serialize_layer(layer: BinarizedLayer) -> bytes:
    """Pack a layer; round-trips bit-exactly through deserialize_layer."""
    cfg = layer.config
    bw = BitWriter()
    bw.write_uint_array(layer.ordering.order, index_bits(layer.m))
    k = int(layer.salient_indices.size)
    if k:
        bw.write_uint_array(layer.salient_indices, 32)
    _write_band(bw, layer.nonsalient_lo, cfg.max_groups)
    _write_band(bw, layer.nonsalient_hi, cfg.max_groups)
    for plane in layer.salient_planes:
        if plane["lo"] is not None:
            _write_band(bw, plane["lo"], cfg.max_groups)
            _write_band(bw, plane["hi"], cfg.max_groups)
        if plane["leftover"] is not None:
            _write_scalar_group(bw, plane["leftover"])
    if layer.nonsalient_leftover is not None:
        _write_scalar_group(bw, layer.nonsalient_leftover)

    payload = bw.getvalue()
    header = _HEADER.pack(
        _MAGIC, _VERSION, layer.n, layer.m,
        cfg.candidate_budget, cfg.group_window, cfg.max_groups,
        _SEED_NORM_CODE[cfg.seed_norm], _HESSIAN_CODE[cfg.hessian_mode],
        _NORM_CODE[cfg.normalization], int(cfg.permute),
        cfg.salient_bitplanes,
        -1 if cfg.k_neighbors is None else cfg.k_neighbors,
        cfg.damping, cfg.split_gain, k, bw.bit_count)
    body = header + payload
    return body + struct.pack("<I", zlib.crc32(body))


def deserialize_layer(data: bytes) -> BinarizedLayer:
    """Parse an .hbq buffer back into a BinarizedLayer."""
    if len(data) < _HEADER.size + 4:
        raise FormatError("buffer shorter than header")
    (magic, version, n, m, budget, window, max_groups, seed_code, hess_code,
     norm_code, permute, bitplanes, k_neighbors, damping, split_gain,
     salient_count, bit_count) = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise FormatError(f"bad magic: {magic!r}")
    if version != _VERSION:
        raise FormatError(f"unsupported version: {version}")
    payload_len = (bit_count + 7) // 8
    expect = _HEADER.size + payload_len + 4
    if len(data) != expect:
        raise FormatError(f"buffer length {len(data)} != expected {expect}")
    crc = struct.unpack_from("<I", data, expect - 4)[0]
    if crc != zlib.crc32(data[: expect - 4]):
        raise FormatError("CRC mismatch")
    code_to = lambda table, code: {v: key for key, v in table.items()}[code]
    cfg = QuantConfig(
        candidate_budget=budget, group_window=window, max_groups=max_groups,
        seed_norm=code_to(_SEED_NORM_CODE, seed_code),
        hessian_mode=code_to(_HESSIAN_CODE, hess_code),
        normalization=code_to(_NORM_CODE, norm_code),
        k_neighbors=None if k_neighbors < 0 else k_neighbors,
        damping=damping, salient_bitplanes=bitplanes, split_gain=split_gain,
        permute=bool(permute))
    br = BitReader(data[_HEADER.size:_HEADER.size + payload_len], bit_count)

    order = br.read_uint_array(m, index_bits(m)).astype(np.int64)
    self_paired = int(order[-1]) if m % 2 else None
    ordering = ColumnOrdering(order, m, self_paired)
    salient = br.read_uint_array(salient_count, 32).astype(np.int64)
    band_width = m // 2
    lo_q = _read_band(br, "shared", n, band_width, window, max_groups)
    hi_q = _read_band(br, "shared", n, band_width, window, max_groups)
    planes = []
    col_width = n // 2
    for _ in range(bitplanes if salient_count else 0):
        if col_width > 0:
            plo = _read_band(br, "grouped", salient_count, col_width, window,
                             max_groups)
            phi = _read_band(br, "grouped", salient_count, col_width, window,
                             max_groups)
        else:
            plo = phi = None
        leftover = _read_scalar_group(br, salient_count) if n % 2 else None
        planes.append({"lo": plo, "hi": phi, "leftover": leftover})
    ns_leftover = _read_scalar_group(br, n) if m % 2 else None
    if not br.done():
        raise FormatError("trailing payload bits")
    layer = BinarizedLayer(n, m, cfg, ordering, salient, lo_q, hi_q,
                           ns_leftover, planes)
    layer.avg_bits = bit_budget(layer)
    return layer
