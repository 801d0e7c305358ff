"""Numeric kernels with a numba JIT path and a pure-numpy fallback.

The JIT path is used when numba imports successfully and the environment
variable ``QFSELECT_NUMBA`` is not set to ``0``/``false``/``off``.  Integer
kernels (block DCT, color conversion, chroma resampling, entropy coding)
produce bit-identical results on both paths; the float SSIM filter kernels
agree to normal float64 tolerance.  ``benchmarks/bench_kernels.py`` times
the two paths against each other.
"""

from __future__ import annotations

import os

import numpy as np


def _numba_wanted() -> bool:
    flag = os.environ.get("QFSELECT_NUMBA", "auto").strip().lower()
    return flag not in ("0", "false", "off", "no")


NUMBA_ENABLED = False
if _numba_wanted():
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:
        pass

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):
        def wrap(func):
            return func

        return wrap


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


# ---------------------------------------------------------------------------
# Fixed-point 8x8 DCT.  Cosine factors are scaled by 2**DCT_SHIFT and all
# accumulation is int64, so both backends produce identical integers.
# Coefficients come out scaled by DCT_SCALE = 2**(2*DCT_SHIFT).
# ---------------------------------------------------------------------------

DCT_SHIFT = 18
DCT_SCALE = 1 << (2 * DCT_SHIFT)


def _dct_matrix() -> np.ndarray:
    u, x = np.meshgrid(np.arange(8), np.arange(8), indexing="ij")
    mat = 0.5 * np.cos((2 * x + 1) * u * np.pi / 16.0)
    mat[0, :] *= 1.0 / np.sqrt(2.0)
    return mat


DCT_COS = np.round(_dct_matrix() * (1 << DCT_SHIFT)).astype(np.int64)


def _fdct_blocks_np(blocks: np.ndarray) -> np.ndarray:
    tmp = np.einsum("ux,nxy->nuy", DCT_COS, blocks.astype(np.int64))
    return np.einsum("nuy,vy->nuv", tmp, DCT_COS)


@njit(cache=True, nogil=True)
def _fdct_blocks_nb(blocks, cos, out):  # pragma: no cover - exercised via wrapper
    n = blocks.shape[0]
    tmp = np.empty((8, 8), np.int64)
    for b in range(n):
        for u in range(8):
            for y in range(8):
                acc = 0
                for x in range(8):
                    acc += cos[u, x] * blocks[b, x, y]
                tmp[u, y] = acc
        for u in range(8):
            for v in range(8):
                acc = 0
                for y in range(8):
                    acc += tmp[u, y] * cos[v, y]
                out[b, u, v] = acc


def fdct_blocks(blocks: np.ndarray) -> np.ndarray:
    """Forward 8x8 DCT of ``(n, 8, 8)`` integer blocks, scaled by DCT_SCALE."""
    if NUMBA_ENABLED:
        out = np.empty(blocks.shape, np.int64)
        _fdct_blocks_nb(np.ascontiguousarray(blocks, np.int64), DCT_COS, out)
        return out
    return _fdct_blocks_np(blocks)


# Inverse transform: the Loeffler-Ligtenberg-Moshovitz fixed-point algorithm
# with libjpeg's islow scaling (CONST_BITS=13, PASS1_BITS=2), so decoded
# samples agree bit-for-bit with common reference decoders.


def _idct_blocks_np(coefs: np.ndarray) -> np.ndarray:
    c = coefs.astype(np.int64)
    n = c.shape[0]
    ws = np.empty((n, 8, 8), np.int64)
    # pass 1: columns (vertical frequencies)
    s0, s1, s2, s3 = c[:, 0, :], c[:, 1, :], c[:, 2, :], c[:, 3, :]
    s4, s5, s6, s7 = c[:, 4, :], c[:, 5, :], c[:, 6, :], c[:, 7, :]
    z1 = (s2 + s6) * 4433
    t2 = z1 - s6 * 15137
    t3 = z1 + s2 * 6270
    t0 = (s0 + s4) << 13
    t1 = (s0 - s4) << 13
    t10, t13 = t0 + t3, t0 - t3
    t11, t12 = t1 + t2, t1 - t2
    o0, o1, o2, o3 = s7, s5, s3, s1
    z1 = o0 + o3
    z2 = o1 + o2
    z3 = o0 + o2
    z4 = o1 + o3
    z5 = (z3 + z4) * 9633
    o0 = o0 * 2446
    o1 = o1 * 16819
    o2 = o2 * 25172
    o3 = o3 * 12299
    z1 = z1 * -7373
    z2 = z2 * -20995
    z3 = z3 * -16069 + z5
    z4 = z4 * -3196 + z5
    o0 += z1 + z3
    o1 += z2 + z4
    o2 += z2 + z3
    o3 += z1 + z4
    ws[:, 0, :] = (t10 + o3 + 1024) >> 11
    ws[:, 7, :] = (t10 - o3 + 1024) >> 11
    ws[:, 1, :] = (t11 + o2 + 1024) >> 11
    ws[:, 6, :] = (t11 - o2 + 1024) >> 11
    ws[:, 2, :] = (t12 + o1 + 1024) >> 11
    ws[:, 5, :] = (t12 - o1 + 1024) >> 11
    ws[:, 3, :] = (t13 + o0 + 1024) >> 11
    ws[:, 4, :] = (t13 - o0 + 1024) >> 11
    # pass 2: rows
    s0, s1, s2, s3 = ws[:, :, 0], ws[:, :, 1], ws[:, :, 2], ws[:, :, 3]
    s4, s5, s6, s7 = ws[:, :, 4], ws[:, :, 5], ws[:, :, 6], ws[:, :, 7]
    z1 = (s2 + s6) * 4433
    t2 = z1 - s6 * 15137
    t3 = z1 + s2 * 6270
    t0 = (s0 + s4) << 13
    t1 = (s0 - s4) << 13
    t10, t13 = t0 + t3, t0 - t3
    t11, t12 = t1 + t2, t1 - t2
    o0, o1, o2, o3 = s7, s5, s3, s1
    z1 = o0 + o3
    z2 = o1 + o2
    z3 = o0 + o2
    z4 = o1 + o3
    z5 = (z3 + z4) * 9633
    o0 = o0 * 2446
    o1 = o1 * 16819
    o2 = o2 * 25172
    o3 = o3 * 12299
    z1 = z1 * -7373
    z2 = z2 * -20995
    z3 = z3 * -16069 + z5
    z4 = z4 * -3196 + z5
    o0 += z1 + z3
    o1 += z2 + z4
    o2 += z2 + z3
    o3 += z1 + z4
    out = np.empty((n, 8, 8), np.int64)
    half = 1 << 17
    out[:, :, 0] = (t10 + o3 + half) >> 18
    out[:, :, 7] = (t10 - o3 + half) >> 18
    out[:, :, 1] = (t11 + o2 + half) >> 18
    out[:, :, 6] = (t11 - o2 + half) >> 18
    out[:, :, 2] = (t12 + o1 + half) >> 18
    out[:, :, 5] = (t12 - o1 + half) >> 18
    out[:, :, 3] = (t13 + o0 + half) >> 18
    out[:, :, 4] = (t13 - o0 + half) >> 18
    return np.clip(out + 128, 0, 255).astype(np.uint8)


@njit(cache=True, nogil=True)
def _idct_blocks_nb(coefs, out):  # pragma: no cover - exercised via wrapper
    n = coefs.shape[0]
    ws = np.empty((8, 8), np.int64)
    for b in range(n):
        for col in range(8):
            s0 = coefs[b, 0, col]
            s1 = coefs[b, 1, col]
            s2 = coefs[b, 2, col]
            s3 = coefs[b, 3, col]
            s4 = coefs[b, 4, col]
            s5 = coefs[b, 5, col]
            s6 = coefs[b, 6, col]
            s7 = coefs[b, 7, col]
            z1 = (s2 + s6) * 4433
            t2 = z1 - s6 * 15137
            t3 = z1 + s2 * 6270
            t0 = (s0 + s4) << 13
            t1 = (s0 - s4) << 13
            t10 = t0 + t3
            t13 = t0 - t3
            t11 = t1 + t2
            t12 = t1 - t2
            o0 = s7
            o1 = s5
            o2 = s3
            o3 = s1
            z1 = o0 + o3
            z2 = o1 + o2
            z3 = o0 + o2
            z4 = o1 + o3
            z5 = (z3 + z4) * 9633
            o0 = o0 * 2446
            o1 = o1 * 16819
            o2 = o2 * 25172
            o3 = o3 * 12299
            z1 = z1 * -7373
            z2 = z2 * -20995
            z3 = z3 * -16069 + z5
            z4 = z4 * -3196 + z5
            o0 += z1 + z3
            o1 += z2 + z4
            o2 += z2 + z3
            o3 += z1 + z4
            ws[0, col] = (t10 + o3 + 1024) >> 11
            ws[7, col] = (t10 - o3 + 1024) >> 11
            ws[1, col] = (t11 + o2 + 1024) >> 11
            ws[6, col] = (t11 - o2 + 1024) >> 11
            ws[2, col] = (t12 + o1 + 1024) >> 11
            ws[5, col] = (t12 - o1 + 1024) >> 11
            ws[3, col] = (t13 + o0 + 1024) >> 11
            ws[4, col] = (t13 - o0 + 1024) >> 11
        for row in range(8):
            s0 = ws[row, 0]
            s1 = ws[row, 1]
            s2 = ws[row, 2]
            s3 = ws[row, 3]
            s4 = ws[row, 4]
            s5 = ws[row, 5]
            s6 = ws[row, 6]
            s7 = ws[row, 7]
            z1 = (s2 + s6) * 4433
            t2 = z1 - s6 * 15137
            t3 = z1 + s2 * 6270
            t0 = (s0 + s4) << 13
            t1 = (s0 - s4) << 13
            t10 = t0 + t3
            t13 = t0 - t3
            t11 = t1 + t2
            t12 = t1 - t2
            o0 = s7
            o1 = s5
            o2 = s3
            o3 = s1
            z1 = o0 + o3
            z2 = o1 + o2
            z3 = o0 + o2
            z4 = o1 + o3
            z5 = (z3 + z4) * 9633
            o0 = o0 * 2446
            o1 = o1 * 16819
            o2 = o2 * 25172
            o3 = o3 * 12299
            z1 = z1 * -7373
            z2 = z2 * -20995
            z3 = z3 * -16069 + z5
            z4 = z4 * -3196 + z5
            o0 += z1 + z3
            o1 += z2 + z4
            o2 += z2 + z3
            o3 += z1 + z4
            half = 1 << 17
            v0 = ((t10 + o3 + half) >> 18) + 128
            v7 = ((t10 - o3 + half) >> 18) + 128
            v1 = ((t11 + o2 + half) >> 18) + 128
            v6 = ((t11 - o2 + half) >> 18) + 128
            v2 = ((t12 + o1 + half) >> 18) + 128
            v5 = ((t12 - o1 + half) >> 18) + 128
            v3 = ((t13 + o0 + half) >> 18) + 128
            v4 = ((t13 - o0 + half) >> 18) + 128
            out[b, row, 0] = min(max(v0, 0), 255)
            out[b, row, 1] = min(max(v1, 0), 255)
            out[b, row, 2] = min(max(v2, 0), 255)
            out[b, row, 3] = min(max(v3, 0), 255)
            out[b, row, 4] = min(max(v4, 0), 255)
            out[b, row, 5] = min(max(v5, 0), 255)
            out[b, row, 6] = min(max(v6, 0), 255)
            out[b, row, 7] = min(max(v7, 0), 255)


def idct_blocks(coefs: np.ndarray) -> np.ndarray:
    """Inverse 8x8 DCT of dequantized ``(n, 8, 8)`` blocks to uint8 samples."""
    if NUMBA_ENABLED:
        out = np.empty(coefs.shape, np.uint8)
        _idct_blocks_nb(np.ascontiguousarray(coefs, np.int64), out)
        return out
    return _idct_blocks_np(coefs)


def quantize_blocks(scaled_coefs: np.ndarray, qtable: np.ndarray) -> np.ndarray:
    """Round coefficients (scaled by DCT_SCALE) to multiples of the table.

    Rounds half away from zero; results are clamped to the baseline Huffman
    category limits so any block stays encodable.
    """
    denom = qtable.astype(np.int64).reshape(1, 8, 8) * DCT_SCALE
    mag = (2 * np.abs(scaled_coefs) + denom) // (2 * denom)
    q = np.sign(scaled_coefs) * mag
    return np.clip(q, -1023, 1023).astype(np.int32)


def dequantize_blocks(quantized: np.ndarray, qtable: np.ndarray) -> np.ndarray:
    return quantized.astype(np.int64) * qtable.astype(np.int64).reshape(1, 8, 8)


# ---------------------------------------------------------------------------
# Color conversion, libjpeg fixed-point arithmetic (scale 2**16).
# ---------------------------------------------------------------------------


def _rgb_to_ycbcr_np(rgb: np.ndarray):
    r = rgb[:, :, 0].astype(np.int64)
    g = rgb[:, :, 1].astype(np.int64)
    b = rgb[:, :, 2].astype(np.int64)
    y = (19595 * r + 38470 * g + 7471 * b + 32768) >> 16
    cb = (-11059 * r - 21709 * g + 32768 * b + (128 << 16) + 32767) >> 16
    cr = (32768 * r - 27439 * g - 5329 * b + (128 << 16) + 32767) >> 16
    return y.astype(np.uint8), cb.astype(np.uint8), cr.astype(np.uint8)


@njit(cache=True, nogil=True)
def _rgb_to_ycbcr_nb(rgb, y, cb, cr):  # pragma: no cover
    h, w = rgb.shape[0], rgb.shape[1]
    for i in range(h):
        for j in range(w):
            r = np.int64(rgb[i, j, 0])
            g = np.int64(rgb[i, j, 1])
            b = np.int64(rgb[i, j, 2])
            y[i, j] = (19595 * r + 38470 * g + 7471 * b + 32768) >> 16
            cb[i, j] = (-11059 * r - 21709 * g + 32768 * b + (128 << 16) + 32767) >> 16
            cr[i, j] = (32768 * r - 27439 * g - 5329 * b + (128 << 16) + 32767) >> 16


def rgb_to_ycbcr(rgb: np.ndarray):
    """BT.601 full-range RGB -> (Y, Cb, Cr) uint8 planes."""
    if NUMBA_ENABLED:
        h, w = rgb.shape[:2]
        y = np.empty((h, w), np.uint8)
        cb = np.empty((h, w), np.uint8)
        cr = np.empty((h, w), np.uint8)
        _rgb_to_ycbcr_nb(np.ascontiguousarray(rgb), y, cb, cr)
        return y, cb, cr
    return _rgb_to_ycbcr_np(rgb)


def _ycbcr_to_rgb_np(y: np.ndarray, cb: np.ndarray, cr: np.ndarray) -> np.ndarray:
    yy = y.astype(np.int64)
    cbv = cb.astype(np.int64) - 128
    crv = cr.astype(np.int64) - 128
    r = yy + ((91881 * crv + 32768) >> 16)
    g = yy + ((-22554 * cbv - 46802 * crv + 32768) >> 16)
    b = yy + ((116130 * cbv + 32768) >> 16)
    out = np.stack([r, g, b], axis=-1)
    return np.clip(out, 0, 255).astype(np.uint8)


@njit(cache=True, nogil=True)
def _ycbcr_to_rgb_nb(y, cb, cr, out):  # pragma: no cover
    h, w = y.shape[0], y.shape[1]
    for i in range(h):
        for j in range(w):
            yy = np.int64(y[i, j])
            cbv = np.int64(cb[i, j]) - 128
            crv = np.int64(cr[i, j]) - 128
            r = yy + ((91881 * crv + 32768) >> 16)
            g = yy + ((-22554 * cbv - 46802 * crv + 32768) >> 16)
            b = yy + ((116130 * cbv + 32768) >> 16)
            out[i, j, 0] = min(max(r, 0), 255)
            out[i, j, 1] = min(max(g, 0), 255)
            out[i, j, 2] = min(max(b, 0), 255)


def ycbcr_to_rgb(y: np.ndarray, cb: np.ndarray, cr: np.ndarray) -> np.ndarray:
    if NUMBA_ENABLED:
        out = np.empty((y.shape[0], y.shape[1], 3), np.uint8)
        _ycbcr_to_rgb_nb(
            np.ascontiguousarray(y), np.ascontiguousarray(cb), np.ascontiguousarray(cr), out
        )
        return out
    return _ycbcr_to_rgb_np(y, cb, cr)


def subsample_2x2(plane: np.ndarray) -> np.ndarray:
    """2x2 box average with edge replication for odd dimensions."""
    h, w = plane.shape
    src = plane
    if h % 2 or w % 2:
        src = np.pad(plane, ((0, h % 2), (0, w % 2)), mode="edge")
    p = src.astype(np.int64)
    s = p[0::2, 0::2] + p[0::2, 1::2] + p[1::2, 0::2] + p[1::2, 1::2]
    return ((s + 2) >> 2).astype(np.uint8)


# ---------------------------------------------------------------------------
# Chroma upsampling.  Replicates libjpeg's fancy (triangle filter) kernels so
# our decoder agrees with reference decoders on 4:2:0 / 4:2:2 streams.
# ---------------------------------------------------------------------------


def _upsample_h2v2_py(plane, out):
    h, w = plane.shape
    for row in range(h):
        for v in range(2):
            other = row - 1 if v == 0 else row + 1
            if other < 0:
                other = 0
            elif other > h - 1:
                other = h - 1
            orow = 2 * row + v
            colsum = 3 * np.int64(plane[row, 0]) + np.int64(plane[other, 0])
            if w == 1:
                out[orow, 0] = (colsum * 4 + 8) >> 4
                out[orow, 1] = (colsum * 4 + 7) >> 4
                continue
            this = colsum
            nxt = 3 * np.int64(plane[row, 1]) + np.int64(plane[other, 1])
            out[orow, 0] = (this * 4 + 8) >> 4
            out[orow, 1] = (this * 3 + nxt + 7) >> 4
            last = this
            this = nxt
            for col in range(1, w - 1):
                nxt = 3 * np.int64(plane[row, col + 1]) + np.int64(plane[other, col + 1])
                out[orow, 2 * col] = (this * 3 + last + 8) >> 4
                out[orow, 2 * col + 1] = (this * 3 + nxt + 7) >> 4
                last = this
                this = nxt
            out[orow, 2 * w - 2] = (this * 3 + last + 8) >> 4
            out[orow, 2 * w - 1] = (this * 4 + 7) >> 4


def _upsample_h2v1_py(plane, out):
    h, w = plane.shape
    for row in range(h):
        if w == 1:
            out[row, 0] = plane[row, 0]
            out[row, 1] = plane[row, 0]
            continue
        out[row, 0] = plane[row, 0]
        out[row, 1] = (3 * np.int64(plane[row, 0]) + np.int64(plane[row, 1]) + 2) >> 2
        for col in range(1, w - 1):
            v3 = 3 * np.int64(plane[row, col])
            out[row, 2 * col] = (v3 + np.int64(plane[row, col - 1]) + 1) >> 2
            out[row, 2 * col + 1] = (v3 + np.int64(plane[row, col + 1]) + 2) >> 2
        v = np.int64(plane[row, w - 1])
        out[row, 2 * w - 2] = (3 * v + np.int64(plane[row, w - 2]) + 1) >> 2
        out[row, 2 * w - 1] = v


if NUMBA_ENABLED:
    _upsample_h2v2 = njit(cache=True, nogil=True)(_upsample_h2v2_py)
    _upsample_h2v1 = njit(cache=True, nogil=True)(_upsample_h2v1_py)
else:
    _upsample_h2v2 = _upsample_h2v2_py
    _upsample_h2v1 = _upsample_h2v1_py


def upsample_plane(plane: np.ndarray, h_factor: int, v_factor: int) -> np.ndarray:
    """Expand a chroma plane by (h_factor, v_factor).

    2x2 and 2x1 use the triangle filter when the plane is wider than two
    samples, plain replication otherwise; other ratios always replicate.
    This matches libjpeg-turbo's upsampler selection.
    """
    if h_factor == 1 and v_factor == 1:
        return plane
    if h_factor == 2 and v_factor == 2 and plane.shape[1] > 2:
        out = np.empty((plane.shape[0] * 2, plane.shape[1] * 2), np.uint8)
        _upsample_h2v2(np.ascontiguousarray(plane), out)
        return out
    if h_factor == 2 and v_factor == 1 and plane.shape[1] > 2:
        out = np.empty((plane.shape[0], plane.shape[1] * 2), np.uint8)
        _upsample_h2v1(np.ascontiguousarray(plane), out)
        return out
    return np.repeat(np.repeat(plane, v_factor, axis=0), h_factor, axis=1)


# ---------------------------------------------------------------------------
# Entropy-coded scan: sequential Huffman bit packing/unpacking.  One source
# definition per function; jitted when numba is on.  Helpers pass the bit
# state around as plain tuples so the fallback stays ordinary Python.
# ---------------------------------------------------------------------------


def _emit_block_py(block, pred, dc_codes, dc_sizes, ac_codes, ac_sizes, out, bitbuf, bitcnt, pos):
    """Huffman-code one zigzag block; returns (new_pred, bitbuf, bitcnt, pos)."""
    dc = int(block[0])
    diff = dc - pred
    size = 0
    a = diff if diff >= 0 else -diff
    while a != 0:
        size += 1
        a >>= 1
    bitbuf = (bitbuf << dc_sizes[size]) | dc_codes[size]
    bitcnt += dc_sizes[size]
    if size > 0:
        amp = diff if diff >= 0 else diff + (1 << size) - 1
        bitbuf = (bitbuf << size) | amp
        bitcnt += size
    while bitcnt >= 8:
        bitcnt -= 8
        byte = (bitbuf >> bitcnt) & 0xFF
        out[pos] = byte
        pos += 1
        if byte == 0xFF:
            out[pos] = 0
            pos += 1
    bitbuf &= (1 << bitcnt) - 1
    run = 0
    for k in range(1, 64):
        val = int(block[k])
        if val == 0:
            run += 1
            continue
        while run >= 16:
            bitbuf = (bitbuf << ac_sizes[0xF0]) | ac_codes[0xF0]
            bitcnt += ac_sizes[0xF0]
            run -= 16
            while bitcnt >= 8:
                bitcnt -= 8
                byte = (bitbuf >> bitcnt) & 0xFF
                out[pos] = byte
                pos += 1
                if byte == 0xFF:
                    out[pos] = 0
                    pos += 1
            bitbuf &= (1 << bitcnt) - 1
        size = 0
        a = val if val >= 0 else -val
        while a != 0:
            size += 1
            a >>= 1
        sym = (run << 4) | size
        bitbuf = (bitbuf << ac_sizes[sym]) | ac_codes[sym]
        bitcnt += ac_sizes[sym]
        amp = val if val >= 0 else val + (1 << size) - 1
        bitbuf = (bitbuf << size) | amp
        bitcnt += size
        run = 0
        while bitcnt >= 8:
            bitcnt -= 8
            byte = (bitbuf >> bitcnt) & 0xFF
            out[pos] = byte
            pos += 1
            if byte == 0xFF:
                out[pos] = 0
                pos += 1
        bitbuf &= (1 << bitcnt) - 1
    if run > 0:
        bitbuf = (bitbuf << ac_sizes[0]) | ac_codes[0]
        bitcnt += ac_sizes[0]
        while bitcnt >= 8:
            bitcnt -= 8
            byte = (bitbuf >> bitcnt) & 0xFF
            out[pos] = byte
            pos += 1
            if byte == 0xFF:
                out[pos] = 0
                pos += 1
        bitbuf &= (1 << bitcnt) - 1
    return dc, bitbuf, bitcnt, pos


def _encode_scan_py(
    yq,
    cbq,
    crq,
    mcus_y,
    mcus_x,
    y_cols,
    c_cols,
    dc_codes_l,
    dc_sizes_l,
    ac_codes_l,
    ac_sizes_l,
    dc_codes_c,
    dc_sizes_c,
    ac_codes_c,
    ac_sizes_c,
    out,
):
    """Write the interleaved 4:2:0 scan into ``out``; returns bytes written."""
    bitbuf = 0
    bitcnt = 0
    pos = 0
    pred_y = 0
    pred_cb = 0
    pred_cr = 0
    for my in range(mcus_y):
        for mx in range(mcus_x):
            for by in range(2):
                for bx in range(2):
                    bi = (2 * my + by) * y_cols + (2 * mx + bx)
                    pred_y, bitbuf, bitcnt, pos = _emit_block(
                        yq[bi], pred_y, dc_codes_l, dc_sizes_l, ac_codes_l, ac_sizes_l,
                        out, bitbuf, bitcnt, pos,
                    )
            ci = my * c_cols + mx
            pred_cb, bitbuf, bitcnt, pos = _emit_block(
                cbq[ci], pred_cb, dc_codes_c, dc_sizes_c, ac_codes_c, ac_sizes_c,
                out, bitbuf, bitcnt, pos,
            )
            pred_cr, bitbuf, bitcnt, pos = _emit_block(
                crq[ci], pred_cr, dc_codes_c, dc_sizes_c, ac_codes_c, ac_sizes_c,
                out, bitbuf, bitcnt, pos,
            )
    if bitcnt > 0:
        pad = 8 - bitcnt
        bitbuf = (bitbuf << pad) | ((1 << pad) - 1)
        byte = bitbuf & 0xFF
        out[pos] = byte
        pos += 1
        if byte == 0xFF:
            out[pos] = 0
            pos += 1
    return pos


# Decoder status codes.
DEC_OK = 0
DEC_BAD_CODE = 1
DEC_TRUNCATED = 2
DEC_BAD_MARKER = 3
DEC_BAD_INDEX = 4

_ERR_SENTINEL = -1000


def _fill_bits_py(data, pos, bitbuf, bitcnt):
    """Load one more byte into the bit buffer, unstuffing 0xFF00.

    Returns (status, pos, bitbuf, bitcnt).
    """
    if pos >= data.shape[0]:
        return DEC_TRUNCATED, pos, bitbuf, bitcnt
    byte = int(data[pos])
    pos += 1
    if byte == 0xFF:
        if pos >= data.shape[0]:
            return DEC_TRUNCATED, pos, bitbuf, bitcnt
        if data[pos] != 0x00:
            return DEC_BAD_MARKER, pos - 1, bitbuf, bitcnt
        pos += 1
    return DEC_OK, pos, (bitbuf << 8) | byte, bitcnt + 8


def _huff_decode_py(data, pos, bitbuf, bitcnt, maxcode, mincode, valptr, huffval):
    """Decode one Huffman symbol; returns (sym_or_negative_status, pos, bitbuf, bitcnt)."""
    code = 0
    length = 0
    while True:
        if bitcnt == 0:
            st, pos, bitbuf, bitcnt = _fill_bits(data, pos, bitbuf, bitcnt)
            if st != DEC_OK:
                return _ERR_SENTINEL - st, pos, bitbuf, bitcnt
        bitcnt -= 1
        code = (code << 1) | ((bitbuf >> bitcnt) & 1)
        length += 1
        if length > 16:
            return _ERR_SENTINEL - DEC_BAD_CODE, pos, bitbuf, bitcnt
        if code <= maxcode[length]:
            sym = int(huffval[valptr[length] + code - mincode[length]])
            bitbuf &= (1 << bitcnt) - 1
            return sym, pos, bitbuf, bitcnt


def _receive_extend_py(data, pos, bitbuf, bitcnt, size):
    """Read ``size`` magnitude bits and sign-extend; returns (status, val, ...)."""
    while bitcnt < size:
        st, pos, bitbuf, bitcnt = _fill_bits(data, pos, bitbuf, bitcnt)
        if st != DEC_OK:
            return st, 0, pos, bitbuf, bitcnt
    bitcnt -= size
    v = (bitbuf >> bitcnt) & ((1 << size) - 1)
    bitbuf &= (1 << bitcnt) - 1
    if v < (1 << (size - 1)):
        v = v - (1 << size) + 1
    return DEC_OK, v, pos, bitbuf, bitcnt


def _decode_scan_py(
    data,
    start,
    ncomp,
    comp_h,
    comp_v,
    comp_cols,
    comp_dc_sel,
    comp_ac_sel,
    blocks,
    dc_maxcode,
    dc_mincode,
    dc_valptr,
    dc_huffval,
    ac_maxcode,
    ac_mincode,
    ac_valptr,
    ac_huffval,
    mcus_y,
    mcus_x,
    restart_interval,
    result,
):
    """Decode an interleaved baseline scan into per-component zigzag blocks.

    ``blocks`` is ``(ncomp, max_blocks, 64)`` int32, zeroed by the caller.
    ``result`` receives (status, next_offset).
    """
    pos = start
    bitbuf = 0
    bitcnt = 0
    preds = np.zeros(4, np.int64)
    mcu_count = 0
    for my in range(mcus_y):
        for mx in range(mcus_x):
            if restart_interval > 0 and mcu_count == restart_interval:
                bitbuf = 0
                bitcnt = 0
                if pos + 1 >= data.shape[0]:
                    result[0] = DEC_TRUNCATED
                    result[1] = pos
                    return
                if data[pos] != 0xFF or not (0xD0 <= data[pos + 1] <= 0xD7):
                    result[0] = DEC_BAD_MARKER
                    result[1] = pos
                    return
                pos += 2
                for c in range(4):
                    preds[c] = 0
                mcu_count = 0
            mcu_count += 1
            for c in range(ncomp):
                for vb in range(comp_v[c]):
                    for hb in range(comp_h[c]):
                        row = my * comp_v[c] + vb
                        col = mx * comp_h[c] + hb
                        bidx = row * comp_cols[c] + col
                        ts = comp_dc_sel[c]
                        sym, pos, bitbuf, bitcnt = _huff_decode(
                            data, pos, bitbuf, bitcnt,
                            dc_maxcode[ts], dc_mincode[ts], dc_valptr[ts], dc_huffval[ts],
                        )
                        if sym < 0:
                            result[0] = _ERR_SENTINEL - sym
                            result[1] = pos
                            return
                        if sym > 0:
                            st, diff, pos, bitbuf, bitcnt = _receive_extend(
                                data, pos, bitbuf, bitcnt, sym
                            )
                            if st != DEC_OK:
                                result[0] = st
                                result[1] = pos
                                return
                        else:
                            diff = 0
                        preds[c] += diff
                        blocks[c, bidx, 0] = preds[c]
                        ts = comp_ac_sel[c]
                        k = 1
                        while k < 64:
                            sym, pos, bitbuf, bitcnt = _huff_decode(
                                data, pos, bitbuf, bitcnt,
                                ac_maxcode[ts], ac_mincode[ts], ac_valptr[ts], ac_huffval[ts],
                            )
                            if sym < 0:
                                result[0] = _ERR_SENTINEL - sym
                                result[1] = pos
                                return
                            run = sym >> 4
                            size = sym & 0x0F
                            if size == 0:
                                if run == 15:
                                    k += 16
                                    continue
                                break  # end of block
                            k += run
                            if k > 63:
                                result[0] = DEC_BAD_INDEX
                                result[1] = pos
                                return
                            st, val, pos, bitbuf, bitcnt = _receive_extend(
                                data, pos, bitbuf, bitcnt, size
                            )
                            if st != DEC_OK:
                                result[0] = st
                                result[1] = pos
                                return
                            blocks[c, bidx, k] = val
                            k += 1
    result[0] = DEC_OK
    result[1] = pos


if NUMBA_ENABLED:
    _emit_block = njit(cache=True, nogil=True)(_emit_block_py)
    _encode_scan = njit(cache=True, nogil=True)(_encode_scan_py)
    _fill_bits = njit(cache=True, nogil=True)(_fill_bits_py)
    _huff_decode = njit(cache=True, nogil=True)(_huff_decode_py)
    _receive_extend = njit(cache=True, nogil=True)(_receive_extend_py)
    _decode_scan = njit(cache=True, nogil=True)(_decode_scan_py)
else:
    _emit_block = _emit_block_py
    _encode_scan = _encode_scan_py
    _fill_bits = _fill_bits_py
    _huff_decode = _huff_decode_py
    _receive_extend = _receive_extend_py
    _decode_scan = _decode_scan_py


def encode_scan(yq, cbq, crq, mcus_y, mcus_x, y_cols, c_cols, luma_tables, chroma_tables):
    """Entropy-code a 4:2:0 interleaved scan; returns the scan bytes."""
    dc_l, ac_l = luma_tables
    dc_c, ac_c = chroma_tables
    worst = 4 * 64 * (yq.shape[0] + cbq.shape[0] + crq.shape[0]) + 64
    out = np.empty(worst, np.uint8)
    nbytes = _encode_scan(
        np.ascontiguousarray(yq, np.int64),
        np.ascontiguousarray(cbq, np.int64),
        np.ascontiguousarray(crq, np.int64),
        mcus_y,
        mcus_x,
        y_cols,
        c_cols,
        dc_l.codes,
        dc_l.sizes,
        ac_l.codes,
        ac_l.sizes,
        dc_c.codes,
        dc_c.sizes,
        ac_c.codes,
        ac_c.sizes,
        out,
    )
    return out[:nbytes].tobytes()


# ---------------------------------------------------------------------------
# Separable valid-region Gaussian filtering for SSIM.
# ---------------------------------------------------------------------------


def _filter_valid_np(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    k = kernel.shape[0]
    h, w = img.shape
    tmp = np.zeros((h, w - k + 1), np.float64)
    for i in range(k):
        tmp += kernel[i] * img[:, i : i + w - k + 1]
    out = np.zeros((h - k + 1, w - k + 1), np.float64)
    for i in range(k):
        out += kernel[i] * tmp[i : i + h - k + 1, :]
    return out


@njit(cache=True, nogil=True)
def _filter_valid_nb(img, kernel, tmp, out):  # pragma: no cover
    k = kernel.shape[0]
    h, w = img.shape
    for i in range(h):
        for j in range(w - k + 1):
            acc = 0.0
            for t in range(k):
                acc += kernel[t] * img[i, j + t]
            tmp[i, j] = acc
    for i in range(h - k + 1):
        for j in range(w - k + 1):
            acc = 0.0
            for t in range(k):
                acc += kernel[t] * tmp[i + t, j]
            out[i, j] = acc


def filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable symmetric filter, valid region only."""
    if NUMBA_ENABLED:
        k = kernel.shape[0]
        h, w = img.shape
        tmp = np.empty((h, w - k + 1), np.float64)
        out = np.empty((h - k + 1, w - k + 1), np.float64)
        _filter_valid_nb(np.ascontiguousarray(img, np.float64), kernel, tmp, out)
        return out
    return _filter_valid_np(img, kernel)
