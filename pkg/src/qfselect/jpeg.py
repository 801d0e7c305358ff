"""Baseline JPEG codec: quality-factor scaled quantization, 4:2:0, JFIF.

The encoder always emits a baseline sequential JFIF stream with 4:2:0
chroma subsampling and the standard Huffman tables; the decoder handles
common baseline streams (1 or 3 components, sampling factors up to 2x2,
restart markers).  Progressive and arithmetic-coded streams are rejected.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import MalformedStreamError, QfSelectError

# Annex K base quantization tables (row-major).
BASE_LUMA_QT = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int32,
)

BASE_CHROMA_QT = np.array(
    [
        [17, 18, 24, 47, 99, 99, 99, 99],
        [18, 21, 26, 66, 99, 99, 99, 99],
        [24, 26, 56, 99, 99, 99, 99, 99],
        [47, 66, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
    ],
    dtype=np.int32,
)

# Zigzag scan: ZIGZAG[i] is the row-major index of the i-th zigzag entry.
ZIGZAG = np.array(
    [
        0, 1, 8, 16, 9, 2, 3, 10,
        17, 24, 32, 25, 18, 11, 4, 5,
        12, 19, 26, 33, 40, 48, 41, 34,
        27, 20, 13, 6, 7, 14, 21, 28,
        35, 42, 49, 56, 57, 50, 43, 36,
        29, 22, 15, 23, 30, 37, 44, 51,
        58, 59, 52, 45, 38, 31, 39, 46,
        53, 60, 61, 54, 47, 55, 62, 63,
    ],
    dtype=np.int64,
)
UNZIGZAG = np.argsort(ZIGZAG)

# Standard Huffman table specs (Annex K): (bits[1..16], values).
STD_DC_LUMA = (
    (0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0),
    tuple(range(12)),
)
STD_DC_CHROMA = (
    (0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0),
    tuple(range(12)),
)
STD_AC_LUMA = (
    (0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7D),
    (
        0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06,
        0x13, 0x51, 0x61, 0x07, 0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xA1, 0x08,
        0x23, 0x42, 0xB1, 0xC1, 0x15, 0x52, 0xD1, 0xF0, 0x24, 0x33, 0x62, 0x72,
        0x82, 0x09, 0x0A, 0x16, 0x17, 0x18, 0x19, 0x1A, 0x25, 0x26, 0x27, 0x28,
        0x29, 0x2A, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3A, 0x43, 0x44, 0x45,
        0x46, 0x47, 0x48, 0x49, 0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59,
        0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6A, 0x73, 0x74, 0x75,
        0x76, 0x77, 0x78, 0x79, 0x7A, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
        0x8A, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9A, 0xA2, 0xA3,
        0xA4, 0xA5, 0xA6, 0xA7, 0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4, 0xB5, 0xB6,
        0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3, 0xC4, 0xC5, 0xC6, 0xC7, 0xC8, 0xC9,
        0xCA, 0xD2, 0xD3, 0xD4, 0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA, 0xE1, 0xE2,
        0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9, 0xEA, 0xF1, 0xF2, 0xF3, 0xF4,
        0xF5, 0xF6, 0xF7, 0xF8, 0xF9, 0xFA,
    ),
)
STD_AC_CHROMA = (
    (0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77),
    (
        0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21, 0x31, 0x06, 0x12, 0x41,
        0x51, 0x07, 0x61, 0x71, 0x13, 0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91,
        0xA1, 0xB1, 0xC1, 0x09, 0x23, 0x33, 0x52, 0xF0, 0x15, 0x62, 0x72, 0xD1,
        0x0A, 0x16, 0x24, 0x34, 0xE1, 0x25, 0xF1, 0x17, 0x18, 0x19, 0x1A, 0x26,
        0x27, 0x28, 0x29, 0x2A, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3A, 0x43, 0x44,
        0x45, 0x46, 0x47, 0x48, 0x49, 0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58,
        0x59, 0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6A, 0x73, 0x74,
        0x75, 0x76, 0x77, 0x78, 0x79, 0x7A, 0x82, 0x83, 0x84, 0x85, 0x86, 0x87,
        0x88, 0x89, 0x8A, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9A,
        0xA2, 0xA3, 0xA4, 0xA5, 0xA6, 0xA7, 0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4,
        0xB5, 0xB6, 0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3, 0xC4, 0xC5, 0xC6, 0xC7,
        0xC8, 0xC9, 0xCA, 0xD2, 0xD3, 0xD4, 0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA,
        0xE2, 0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9, 0xEA, 0xF2, 0xF3, 0xF4,
        0xF5, 0xF6, 0xF7, 0xF8, 0xF9, 0xFA,
    ),
)


@dataclass(frozen=True)
class QualityFactor:
    value: int

    def __post_init__(self):
        if not 1 <= self.value <= 100:
            raise QfSelectError(f"quality factor {self.value} outside [1, 100]")


@dataclass(frozen=True)
class QuantTables:
    luma: np.ndarray
    chroma: np.ndarray


@dataclass(frozen=True)
class JpegBytes:
    data: bytes
    qf_used: QualityFactor


def quality_to_tables(qf: QualityFactor | int) -> QuantTables:
    """Scale the Annex K base tables by the IJG quality-factor convention."""
    q = qf.value if isinstance(qf, QualityFactor) else QualityFactor(int(qf)).value
    scale = 5000 // q if q < 50 else 200 - 2 * q
    luma = np.clip((BASE_LUMA_QT * scale + 50) // 100, 1, 255).astype(np.int32)
    chroma = np.clip((BASE_CHROMA_QT * scale + 50) // 100, 1, 255).astype(np.int32)
    return QuantTables(luma=luma, chroma=chroma)


class HuffEncTable:
    """Symbol -> (code, size) arrays built from a (bits, values) spec."""

    def __init__(self, bits, values):
        self.bits = tuple(bits)
        self.values = tuple(values)
        self.codes = np.zeros(256, np.int64)
        self.sizes = np.zeros(256, np.int64)
        code = 0
        k = 0
        for length in range(1, 17):
            for _ in range(bits[length - 1]):
                self.codes[values[k]] = code
                self.sizes[values[k]] = length
                code += 1
                k += 1
            code <<= 1


class HuffDecTable:
    """Canonical decode arrays (T.81 F.2.2.3): maxcode/mincode/valptr."""

    def __init__(self, bits, values):
        self.maxcode = np.full(17, -1, np.int64)
        self.mincode = np.zeros(17, np.int64)
        self.valptr = np.zeros(17, np.int64)
        self.huffval = np.zeros(256, np.int64)
        self.huffval[: len(values)] = values
        code = 0
        k = 0
        for length in range(1, 17):
            n = bits[length - 1]
            if n > 0:
                self.valptr[length] = k
                self.mincode[length] = code
                code += n
                k += n
                self.maxcode[length] = code - 1
            code <<= 1


ENC_DC_LUMA = HuffEncTable(*STD_DC_LUMA)
ENC_DC_CHROMA = HuffEncTable(*STD_DC_CHROMA)
ENC_AC_LUMA = HuffEncTable(*STD_AC_LUMA)
ENC_AC_CHROMA = HuffEncTable(*STD_AC_CHROMA)

_MAX_DIMENSION = 65535


def _pad_to_multiple(plane: np.ndarray, mult_y: int, mult_x: int) -> np.ndarray:
    h, w = plane.shape
    ph = (-h) % mult_y
    pw = (-w) % mult_x
    if ph or pw:
        plane = np.pad(plane, ((0, ph), (0, pw)), mode="edge")
    return plane


def _plane_to_blocks(plane: np.ndarray) -> np.ndarray:
    """(H, W) -> (H//8 * W//8, 8, 8), blocks in raster order."""
    h, w = plane.shape
    return (
        plane.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3).reshape(-1, 8, 8)
    )


def _blocks_to_plane(blocks: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return (
        blocks.reshape(rows, cols, 8, 8).transpose(0, 2, 1, 3).reshape(rows * 8, cols * 8)
    )


def _component_quantized(plane: np.ndarray, qtable: np.ndarray) -> np.ndarray:
    """Level-shift, DCT, quantize, zigzag: (H, W) -> (nblocks, 64) int32."""
    blocks = _plane_to_blocks(plane).astype(np.int64) - 128
    coefs = kernels.fdct_blocks(blocks)
    quant = kernels.quantize_blocks(coefs, qtable)
    return quant.reshape(-1, 64)[:, ZIGZAG]


def encode(img: np.ndarray, qf: QualityFactor | int) -> JpegBytes:
    """Encode an (H, W, 3) uint8 RGB image as baseline 4:2:0 JFIF."""
    if isinstance(qf, int):
        qf = QualityFactor(qf)
    if img.ndim != 3 or img.shape[2] != 3:
        raise QfSelectError(f"expected (H, W, 3) RGB image, got shape {img.shape}")
    h, w = img.shape[:2]
    if h < 1 or w < 1:
        raise QfSelectError("image dimensions must be >= 1")
    if h > _MAX_DIMENSION or w > _MAX_DIMENSION:
        raise QfSelectError(f"image dimensions exceed {_MAX_DIMENSION}")
    tables = quality_to_tables(qf)

    y, cb, cr = kernels.rgb_to_ycbcr(np.ascontiguousarray(img, np.uint8))
    y_pad = _pad_to_multiple(y, 16, 16)
    cb_sub = kernels.subsample_2x2(_pad_to_multiple(cb, 2, 2))
    cr_sub = kernels.subsample_2x2(_pad_to_multiple(cr, 2, 2))
    cb_pad = _pad_to_multiple(cb_sub, 8, 8)
    cr_pad = _pad_to_multiple(cr_sub, 8, 8)

    yq = _component_quantized(y_pad, tables.luma)
    cbq = _component_quantized(cb_pad, tables.chroma)
    crq = _component_quantized(cr_pad, tables.chroma)

    mcus_y = y_pad.shape[0] // 16
    mcus_x = y_pad.shape[1] // 16
    scan = kernels.encode_scan(
        yq,
        cbq,
        crq,
        mcus_y,
        mcus_x,
        y_pad.shape[1] // 8,
        cb_pad.shape[1] // 8,
        (ENC_DC_LUMA, ENC_AC_LUMA),
        (ENC_DC_CHROMA, ENC_AC_CHROMA),
    )

    out = bytearray()
    out += b"\xff\xd8"  # SOI
    out += b"\xff\xe0" + struct.pack(">H", 16) + b"JFIF\x00\x01\x01\x00\x00\x01\x00\x01\x00\x00"
    for table_id, qt in ((0, tables.luma), (1, tables.chroma)):
        out += b"\xff\xdb" + struct.pack(">HB", 67, table_id)
        out += qt.reshape(64)[ZIGZAG].astype(np.uint8).tobytes()
    out += b"\xff\xc0" + struct.pack(">HBHHB", 17, 8, h, w, 3)
    out += bytes((1, 0x22, 0, 2, 0x11, 1, 3, 0x11, 1))
    for tc_th, spec in (
        (0x00, STD_DC_LUMA),
        (0x01, STD_DC_CHROMA),
        (0x10, STD_AC_LUMA),
        (0x11, STD_AC_CHROMA),
    ):
        bits, values = spec
        out += b"\xff\xc4" + struct.pack(">HB", 19 + len(values), tc_th)
        out += bytes(bits) + bytes(values)
    out += b"\xff\xda" + struct.pack(">HB", 12, 3)
    out += bytes((1, 0x00, 2, 0x11, 3, 0x11, 0, 63, 0))
    out += scan
    out += b"\xff\xd9"  # EOI
    return JpegBytes(data=bytes(out), qf_used=qf)


# ---------------------------------------------------------------------------
# Decoder
# ---------------------------------------------------------------------------


class _Component:
    __slots__ = ("cid", "h", "v", "tq", "dc_sel", "ac_sel", "cols", "rows")


def _require(cond: bool, msg: str):
    if not cond:
        raise MalformedStreamError(msg)


def decode(data: bytes | JpegBytes) -> np.ndarray:
    """Decode a baseline JPEG stream to an (H, W, 3) uint8 RGB image."""
    if isinstance(data, JpegBytes):
        data = data.data
    buf = np.frombuffer(data, np.uint8)
    n = buf.shape[0]
    _require(n >= 4 and buf[0] == 0xFF and buf[1] == 0xD8, "missing SOI marker")

    qtables: dict[int, np.ndarray] = {}
    dc_specs: dict[int, HuffDecTable] = {}
    ac_specs: dict[int, HuffDecTable] = {}
    restart_interval = 0
    frame = None  # (precision, height, width, components)

    pos = 2
    while True:
        _require(pos + 1 < n, "unexpected end of stream")
        _require(buf[pos] == 0xFF, "marker expected")
        while pos < n and buf[pos] == 0xFF:
            pos += 1
        _require(pos < n, "unexpected end of stream")
        marker = int(buf[pos])
        pos += 1
        if marker == 0xD9:  # EOI with no scan
            raise MalformedStreamError("no scan data before EOI")
        if marker in (0x01,) or 0xD0 <= marker <= 0xD7:
            continue  # parameterless
        _require(pos + 1 < n, "truncated segment header")
        seg_len = (int(buf[pos]) << 8) | int(buf[pos + 1])
        _require(seg_len >= 2 and pos + seg_len <= n, "truncated segment")
        seg = buf[pos + 2 : pos + seg_len]
        pos += seg_len

        if marker == 0xDB:  # DQT
            off = 0
            while off < seg.shape[0]:
                pq = int(seg[off]) >> 4
                tq = int(seg[off]) & 0x0F
                off += 1
                _require(pq in (0, 1), "bad quant precision")
                count = 64 * (2 if pq else 1)
                _require(off + count <= seg.shape[0], "truncated DQT")
                if pq:
                    vals = seg[off : off + 128].astype(np.int64)
                    table = (vals[0::2] << 8) | vals[1::2]
                else:
                    table = seg[off : off + 64].astype(np.int64)
                qtables[tq] = table[UNZIGZAG].reshape(8, 8).astype(np.int32)
                off += count
        elif marker == 0xC4:  # DHT
            off = 0
            while off < seg.shape[0]:
                tc = int(seg[off]) >> 4
                th = int(seg[off]) & 0x0F
                off += 1
                _require(tc in (0, 1) and th < 4, "bad Huffman table id")
                _require(off + 16 <= seg.shape[0], "truncated DHT")
                bits = [int(b) for b in seg[off : off + 16]]
                off += 16
                total = sum(bits)
                _require(off + total <= seg.shape[0], "truncated DHT values")
                values = [int(v) for v in seg[off : off + total]]
                off += total
                table = HuffDecTable(bits, values)
                (dc_specs if tc == 0 else ac_specs)[th] = table
        elif marker == 0xDD:  # DRI
            _require(seg.shape[0] == 2, "bad DRI length")
            restart_interval = (int(seg[0]) << 8) | int(seg[1])
        elif marker == 0xC0 or marker == 0xC1:  # SOF0/1 (both baseline-decodable)
            _require(frame is None, "multiple frames")
            precision = int(seg[0])
            _require(precision == 8, "only 8-bit precision supported")
            height = (int(seg[1]) << 8) | int(seg[2])
            width = (int(seg[3]) << 8) | int(seg[4])
            ncomp = int(seg[5])
            _require(height >= 1 and width >= 1, "bad frame dimensions")
            _require(ncomp in (1, 3), f"unsupported component count {ncomp}")
            comps = []
            off = 6
            for _ in range(ncomp):
                c = _Component()
                c.cid = int(seg[off])
                c.h = int(seg[off + 1]) >> 4
                c.v = int(seg[off + 1]) & 0x0F
                c.tq = int(seg[off + 2])
                _require(1 <= c.h <= 2 and 1 <= c.v <= 2, "unsupported sampling factor")
                comps.append(c)
                off += 3
            frame = (precision, height, width, comps)
        elif marker in (0xC2, 0xC3, 0xC5, 0xC6, 0xC7, 0xC9, 0xCA, 0xCB, 0xCD, 0xCE, 0xCF):
            raise MalformedStreamError("progressive/extended JPEG not supported")
        elif marker == 0xDA:  # SOS
            _require(frame is not None, "scan before frame header")
            break
        else:
            continue  # APPn/COM/etc: skipped

    precision, height, width, comps = frame
    ns = int(seg[0])
    _require(ns == len(comps), "partial scans not supported")
    comp_by_id = {c.cid: c for c in comps}
    off = 1
    for _ in range(ns):
        cid = int(seg[off])
        tsel = int(seg[off + 1])
        _require(cid in comp_by_id, "scan references unknown component")
        c = comp_by_id[cid]
        c.dc_sel = tsel >> 4
        c.ac_sel = tsel & 0x0F
        _require(c.dc_sel in dc_specs and c.ac_sel in ac_specs, "missing Huffman table")
        _require(c.tq in qtables, "missing quant table")
        off += 2

    hmax = max(c.h for c in comps)
    vmax = max(c.v for c in comps)
    mcus_x = -(-width // (8 * hmax))
    mcus_y = -(-height // (8 * vmax))
    for c in comps:
        c.cols = mcus_x * c.h
        c.rows = mcus_y * c.v

    ncomp = len(comps)
    max_blocks = max(c.cols * c.rows for c in comps)
    blocks = np.zeros((ncomp, max_blocks, 64), np.int32)
    comp_h = np.array([c.h for c in comps], np.int64)
    comp_v = np.array([c.v for c in comps], np.int64)
    comp_cols = np.array([c.cols for c in comps], np.int64)
    comp_dc_sel = np.array([c.dc_sel for c in comps], np.int64)
    comp_ac_sel = np.array([c.ac_sel for c in comps], np.int64)

    def stack(specs: dict[int, HuffDecTable], attr: str, width_: int) -> np.ndarray:
        out = np.zeros((4, width_), np.int64)
        if attr == "maxcode":
            out[:] = -1
        for idx, table in specs.items():
            out[idx] = getattr(table, attr)
        return out

    result = np.zeros(2, np.int64)
    kernels._decode_scan(
        buf,
        pos,
        ncomp,
        comp_h,
        comp_v,
        comp_cols,
        comp_dc_sel,
        comp_ac_sel,
        blocks,
        stack(dc_specs, "maxcode", 17),
        stack(dc_specs, "mincode", 17),
        stack(dc_specs, "valptr", 17),
        stack(dc_specs, "huffval", 256),
        stack(ac_specs, "maxcode", 17),
        stack(ac_specs, "mincode", 17),
        stack(ac_specs, "valptr", 17),
        stack(ac_specs, "huffval", 256),
        mcus_y,
        mcus_x,
        restart_interval,
        result,
    )
    status = int(result[0])
    if status != kernels.DEC_OK:
        msgs = {
            kernels.DEC_BAD_CODE: "invalid Huffman code",
            kernels.DEC_TRUNCATED: "truncated scan data",
            kernels.DEC_BAD_MARKER: "unexpected marker in scan",
            kernels.DEC_BAD_INDEX: "coefficient index out of range",
        }
        raise MalformedStreamError(msgs.get(status, "scan decode failed"))

    planes = []
    for idx, c in enumerate(comps):
        nb = c.cols * c.rows
        zz = blocks[idx, :nb, :]
        natural = np.zeros((nb, 64), np.int32)
        natural[:, ZIGZAG] = zz
        deq = kernels.dequantize_blocks(natural.reshape(-1, 8, 8), qtables[c.tq])
        samples = kernels.idct_blocks(deq)
        plane = _blocks_to_plane(samples, c.rows, c.cols)
        # crop to the component's true downsampled size before upsampling so
        # the triangle filter's edge handling lands on the real last row/col
        comp_h_px = -(-height * c.v // vmax)
        comp_w_px = -(-width * c.h // hmax)
        plane = plane[:comp_h_px, :comp_w_px]
        plane = kernels.upsample_plane(plane, hmax // c.h, vmax // c.v)
        planes.append(plane[:height, :width])

    if ncomp == 1:
        gray = planes[0]
        return np.repeat(gray[:, :, None], 3, axis=2)
    return kernels.ycbcr_to_rgb(planes[0], planes[1], planes[2])
