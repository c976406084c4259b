"""Baseline sequential grayscale JPEG: quantized-coefficient parser and encoder.

The parser stops at the entropy layer: it returns q-indices and the luma
quantization table so that decoders other than the standard one can choose
coefficient values inside the quantization bins.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dct import INV_ZIGZAG, ZIGZAG, Dct8x8
from .errors import (
    HuffmanDecodeError,
    MalformedMarker,
    TruncatedStream,
    UnsupportedFeature,
)

# IJG / Annex K luminance table, row-major
IJG_LUMA = np.array([
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
], dtype=np.int64)

# Annex K.3 luminance Huffman tables: (BITS, HUFFVAL)
DC_LUMA_BITS = (0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0)
DC_LUMA_VALS = tuple(range(12))
AC_LUMA_BITS = (0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7D)
AC_LUMA_VALS = (
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07,
    0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xA1, 0x08, 0x23, 0x42, 0xB1, 0xC1, 0x15, 0x52, 0xD1, 0xF0,
    0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0A, 0x16, 0x17, 0x18, 0x19, 0x1A, 0x25, 0x26, 0x27, 0x28,
    0x29, 0x2A, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3A, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49,
    0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69,
    0x6A, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7A, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
    0x8A, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9A, 0xA2, 0xA3, 0xA4, 0xA5, 0xA6, 0xA7,
    0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4, 0xB5, 0xB6, 0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3, 0xC4, 0xC5,
    0xC6, 0xC7, 0xC8, 0xC9, 0xCA, 0xD2, 0xD3, 0xD4, 0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA, 0xE1, 0xE2,
    0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9, 0xEA, 0xF1, 0xF2, 0xF3, 0xF4, 0xF5, 0xF6, 0xF7, 0xF8,
    0xF9, 0xFA,
)

SOI, EOI, SOS, DQT, DHT, SOF0, SOF1, DRI = 0xD8, 0xD9, 0xDA, 0xDB, 0xC4, 0xC0, 0xC1, 0xDD
_UNSUPPORTED_SOF = {
    0xC2: "progressive DCT", 0xC3: "lossless", 0xC5: "differential sequential",
    0xC6: "differential progressive", 0xC7: "differential lossless",
    0xC9: "arithmetic sequential", 0xCA: "arithmetic progressive",
    0xCB: "arithmetic lossless", 0xCD: "arithmetic differential sequential",
    0xCE: "arithmetic differential progressive", 0xCF: "arithmetic differential lossless",
    0xCC: "arithmetic conditioning (DAC)", 0xDC: "DNL", 0xDE: "hierarchical (DHP)",
    0xDF: "hierarchical (EXP)",
}

MAX_DC = 2047
MAX_AC = 1023


def ijg_scale(qf: int) -> int:
    if not 1 <= qf <= 100:
        raise ValueError(f"quality factor must be in 1..100, got {qf}")
    return 5000 // qf if qf < 50 else 200 - 2 * qf


def ijg_table(qf: int) -> np.ndarray:
    """Row-major luma table for quality ``qf`` using the IJG scaling convention."""
    scale = ijg_scale(qf)
    # IJG integer rounding: (base * scale + 50) / 100
    return np.clip((IJG_LUMA * scale + 50) // 100, 1, 255)


@dataclass(frozen=True)
class QuantTable:
    """64 quantization steps stored in zig-zag order."""

    entries: tuple[int, ...]
    quality_factor: int | None = None

    def __post_init__(self):
        entries = tuple(int(v) for v in self.entries)
        if len(entries) != 64:
            raise ValueError("quantization table needs 64 entries")
        if min(entries) < 1 or max(entries) > 255:
            raise ValueError("baseline quantization steps must lie in 1..255")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_quality(cls, qf: int) -> "QuantTable":
        return cls.from_matrix(ijg_table(qf), quality_factor=qf)

    @classmethod
    def from_matrix(cls, matrix, quality_factor: int | None = None) -> "QuantTable":
        flat = np.asarray(matrix).reshape(64)
        return cls(tuple(int(v) for v in flat[ZIGZAG]), quality_factor)

    @property
    def matrix(self) -> np.ndarray:
        """8x8 row-major view as float64."""
        zz = np.asarray(self.entries, dtype=np.float64)
        return zz[INV_ZIGZAG].reshape(8, 8)


@dataclass(frozen=True, eq=False)
class QuantizedImage:
    """q-indices of every 8x8 code block plus the luma table.

    ``blocks`` has shape ``(block_rows, block_cols, 8, 8)`` in row-major
    coefficient order (already de-zig-zagged).
    """

    width: int
    height: int
    blocks: np.ndarray
    luma_qtable: QuantTable

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        blocks = np.array(self.blocks, dtype=np.int32)
        expected = (-(-self.height // 8), -(-self.width // 8), 8, 8)
        if blocks.shape != expected:
            raise ValueError(f"block grid {blocks.shape} does not match {expected}")
        if np.abs(blocks).max(initial=0) > MAX_DC:
            raise ValueError("q-index outside baseline range")
        blocks.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)

    @property
    def grid(self) -> tuple[int, int]:
        return self.blocks.shape[0], self.blocks.shape[1]

    @property
    def n_blocks(self) -> int:
        return self.blocks.shape[0] * self.blocks.shape[1]

    def dequantized(self) -> np.ndarray:
        """Bin-center coefficients ``q * Q`` per block."""
        return self.blocks * self.luma_qtable.matrix

    def __eq__(self, other):
        if not isinstance(other, QuantizedImage):
            return NotImplemented
        return (self.width, self.height, self.luma_qtable) == (
            other.width, other.height, other.luma_qtable
        ) and np.array_equal(self.blocks, other.blocks)


# ---------------------------------------------------------------- raster <-> blocks

def pad_to_blocks(pixels: np.ndarray) -> np.ndarray:
    h, w = pixels.shape
    ph, pw = -(-h // 8) * 8, -(-w // 8) * 8
    return np.pad(pixels, ((0, ph - h), (0, pw - w)), mode="edge")


def raster_to_blocks(raster: np.ndarray) -> np.ndarray:
    """(H, W) with H, W multiples of 8 -> (H/8, W/8, 8, 8)."""
    h, w = raster.shape
    return raster.reshape(h // 8, 8, w // 8, 8).swapaxes(1, 2)


def blocks_to_raster(blocks: np.ndarray) -> np.ndarray:
    by, bx = blocks.shape[:2]
    return blocks.swapaxes(1, 2).reshape(by * 8, bx * 8)


def coefficients_to_raster(coeffs: np.ndarray, width: int, height: int,
                           clamp: bool = True) -> np.ndarray:
    """Inverse DCT + level shift of a block grid, cropped to ``height x width`` (float)."""
    pix = blocks_to_raster(Dct8x8.inverse(coeffs)) + 128.0
    pix = pix[:height, :width]
    if clamp:
        pix = np.clip(pix, 0.0, 255.0)
    return pix


def to_uint8(raster: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(np.asarray(raster, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


def block_coefficients(pixels: np.ndarray) -> np.ndarray:
    """Level-shifted forward DCT of every (edge-padded) code block."""
    padded = pad_to_blocks(np.asarray(pixels, dtype=np.float64))
    return Dct8x8.forward(raster_to_blocks(padded) - 128.0)


def quantize_image(pixels: np.ndarray, qf: int) -> QuantizedImage:
    """Encoder-side quantization ``q = round(Y / Q)`` with half-up rounding."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or min(pixels.shape) < 1:
        raise ValueError("expected a non-empty 2-D grayscale raster")
    table = QuantTable.from_quality(qf)
    coeffs = block_coefficients(pixels)
    q = np.floor(coeffs / table.matrix + 0.5).astype(np.int64)
    q[..., 1:] = np.clip(q[..., 1:], -MAX_AC, MAX_AC)
    q[..., 1:, 0] = np.clip(q[..., 1:, 0], -MAX_AC, MAX_AC)
    q[..., 0, 0] = np.clip(q[..., 0, 0], -1024, 1023)
    return QuantizedImage(pixels.shape[1], pixels.shape[0], q, table)


def hard_decode(qimg: QuantizedImage) -> np.ndarray:
    """Standard decode: bin centers, inverse DCT, level shift, clamp, 8-bit rounding."""
    return to_uint8(coefficients_to_raster(qimg.dequantized(), qimg.width, qimg.height))


# ---------------------------------------------------------------- Huffman helpers

def _huffman_codes(bits, vals) -> dict[int, tuple[int, int]]:
    """Annex C canonical code assignment: symbol -> (code, length)."""
    codes = {}
    code = 0
    k = 0
    for length in range(1, 17):
        for _ in range(bits[length - 1]):
            codes[vals[k]] = (code, length)
            code += 1
            k += 1
        code <<= 1
    return codes


def _category(v: int) -> int:
    return int(abs(v)).bit_length()


def _magnitude_bits(v: int, size: int) -> int:
    return v if v >= 0 else v + (1 << size) - 1


class _BitWriter:
    def __init__(self):
        self.out = bytearray()
        self.acc = 0
        self.n = 0

    def write(self, value: int, length: int):
        self.acc = (self.acc << length) | (value & ((1 << length) - 1))
        self.n += length
        while self.n >= 8:
            self.n -= 8
            byte = (self.acc >> self.n) & 0xFF
            self.out.append(byte)
            if byte == 0xFF:
                self.out.append(0x00)
        self.acc &= (1 << self.n) - 1

    def flush(self) -> bytes:
        if self.n:
            self.write((1 << (8 - self.n)) - 1, 8 - self.n)
        return bytes(self.out)


def _segment(marker: int, payload: bytes) -> bytes:
    return struct.pack(">BBH", 0xFF, marker, len(payload) + 2) + payload


def write_jpeg(qimg: QuantizedImage) -> bytes:
    """Entropy-code a QuantizedImage with the Annex K luminance tables."""
    dc_codes = _huffman_codes(DC_LUMA_BITS, DC_LUMA_VALS)
    ac_codes = _huffman_codes(AC_LUMA_BITS, AC_LUMA_VALS)
    bw = _BitWriter()
    pred = 0
    zz_blocks = qimg.blocks.reshape(-1, 64)[:, ZIGZAG]
    for zz in zz_blocks.tolist():
        diff = zz[0] - pred
        pred = zz[0]
        size = _category(diff)
        code, length = dc_codes[size]
        bw.write(code, length)
        if size:
            bw.write(_magnitude_bits(diff, size), size)
        run = 0
        last = 63
        while last > 0 and zz[last] == 0:
            last -= 1
        for k in range(1, last + 1):
            v = zz[k]
            if v == 0:
                run += 1
                continue
            while run > 15:
                bw.write(*ac_codes[0xF0])
                run -= 16
            size = _category(v)
            bw.write(*ac_codes[(run << 4) | size])
            bw.write(_magnitude_bits(v, size), size)
            run = 0
        if last < 63:
            bw.write(*ac_codes[0x00])
    scan = bw.flush()

    out = bytearray(b"\xff\xd8")
    out += _segment(0xE0, b"JFIF\x00\x01\x01\x00\x00\x01\x00\x01\x00\x00")
    out += _segment(DQT, bytes([0x00]) + bytes(qimg.luma_qtable.entries))
    out += _segment(SOF0, struct.pack(">BHHB", 8, qimg.height, qimg.width, 1) + bytes([1, 0x11, 0]))
    out += _segment(DHT, bytes([0x00]) + bytes(DC_LUMA_BITS) + bytes(DC_LUMA_VALS))
    out += _segment(DHT, bytes([0x10]) + bytes(AC_LUMA_BITS) + bytes(AC_LUMA_VALS))
    out += _segment(SOS, bytes([1, 1, 0x00, 0, 63, 0]))
    out += scan
    out += b"\xff\xd9"
    return bytes(out)


def encode_jpeg(pixels: np.ndarray, qf: int) -> bytes:
    """Baseline grayscale JPEG of an 8-bit raster at IJG quality ``qf``."""
    return write_jpeg(quantize_image(pixels, qf))


# ---------------------------------------------------------------- parser

class _HuffTable:
    def __init__(self, bits, vals):
        if sum(bits) != len(vals) or len(vals) > 256:
            raise MalformedMarker("Huffman table counts do not match symbol list")
        self.lookup = {(length, code): sym for sym, code, length in _huffman_codes_list(bits, vals)}


def _huffman_codes_list(bits, vals):
    out = []
    code = 0
    k = 0
    for length in range(1, 17):
        for _ in range(bits[length - 1]):
            out.append((vals[k], code, length))
            code += 1
            k += 1
        if code > (1 << length):
            raise MalformedMarker("over-subscribed Huffman table")
        code <<= 1
    return out


class _BitReader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.bit = 0
        self.nbits = len(data) * 8

    def read_bit(self) -> int:
        if self.pos * 8 + self.bit >= self.nbits:
            raise TruncatedStream("entropy-coded segment ended inside a block")
        b = (self.data[self.pos] >> (7 - self.bit)) & 1
        self.bit += 1
        if self.bit == 8:
            self.bit = 0
            self.pos += 1
        return b

    def read_bits(self, n: int) -> int:
        v = 0
        for _ in range(n):
            v = (v << 1) | self.read_bit()
        return v

    def decode(self, table: _HuffTable) -> int:
        code = 0
        for length in range(1, 17):
            code = (code << 1) | self.read_bit()
            sym = table.lookup.get((length, code))
            if sym is not None:
                return sym
        raise HuffmanDecodeError("no Huffman code matches the bitstream")


def _extend(v: int, size: int) -> int:
    return v - (1 << size) + 1 if size and v < (1 << (size - 1)) else v


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def need(self, n: int):
        if self.pos + n > len(self.data):
            raise TruncatedStream(f"stream ended at byte {len(self.data)} while reading {n} bytes")

    def u8(self) -> int:
        self.need(1)
        v = self.data[self.pos]
        self.pos += 1
        return v

    def u16(self) -> int:
        self.need(2)
        v = (self.data[self.pos] << 8) | self.data[self.pos + 1]
        self.pos += 2
        return v

    def take(self, n: int) -> bytes:
        self.need(n)
        v = self.data[self.pos:self.pos + n]
        self.pos += n
        return v

    def segment(self) -> bytes:
        length = self.u16()
        if length < 2:
            raise MalformedMarker(f"segment length {length} < 2")
        return self.take(length - 2)


def _scan_data(data: bytes, start: int) -> tuple[bytes, int]:
    """Unstuffed entropy-coded bytes and the offset of the terminating marker."""
    out = bytearray()
    pos = start
    n = len(data)
    while True:
        ff = data.find(b"\xff", pos)
        if ff < 0 or ff + 1 >= n:
            raise TruncatedStream("entropy-coded segment not terminated by a marker")
        out += data[pos:ff]
        nxt = data[ff + 1]
        if nxt == 0x00:
            out.append(0xFF)
            pos = ff + 2
        elif 0xD0 <= nxt <= 0xD7:
            raise UnsupportedFeature("restart markers are not supported")
        elif nxt == 0xFF:
            pos = ff + 1  # fill byte
        else:
            return bytes(out), ff


def _match_quality(table: np.ndarray) -> int | None:
    for qf in range(1, 101):
        if np.array_equal(ijg_table(qf).reshape(64), table.reshape(64)):
            return qf
    return None


def parse_jpeg(data: bytes) -> QuantizedImage:
    """Parse a baseline grayscale JPEG down to its q-indices and quantization table."""
    data = bytes(data)
    cur = _Cursor(data)
    if len(data) < 2:
        raise TruncatedStream("stream shorter than an SOI marker")
    if cur.u8() != 0xFF or cur.u8() != SOI:
        raise MalformedMarker("stream does not start with SOI")

    qtables: dict[int, tuple[int, ...]] = {}
    dc_tables: dict[int, _HuffTable] = {}
    ac_tables: dict[int, _HuffTable] = {}
    frame = None
    result = None

    while True:
        if cur.u8() != 0xFF:
            raise MalformedMarker(f"expected marker at byte {cur.pos - 1}")
        marker = cur.u8()
        while marker == 0xFF:
            marker = cur.u8()
        if marker == EOI:
            if result is None:
                raise MalformedMarker("EOI before any scan")
            return result
        if marker == SOI:
            raise MalformedMarker("SOI inside stream")
        if marker in _UNSUPPORTED_SOF:
            raise UnsupportedFeature(_UNSUPPORTED_SOF[marker])
        if 0xD0 <= marker <= 0xD7 or marker in (0x00, 0x01):
            raise MalformedMarker(f"unexpected marker 0xFF{marker:02X}")

        if result is not None and marker == SOS:
            raise UnsupportedFeature("multiple scans")

        if marker == DQT:
            seg = _Cursor(cur.segment())
            while seg.pos < len(seg.data):
                pq_tq = seg.u8()
                if pq_tq >> 4 != 0:
                    raise UnsupportedFeature("16-bit quantization tables")
                if (pq_tq & 15) > 3:
                    raise MalformedMarker("quantization table id > 3")
                vals = tuple(seg.take(64))
                if min(vals) == 0:
                    raise MalformedMarker("zero quantization step")
                qtables[pq_tq & 15] = vals
        elif marker == DHT:
            seg = _Cursor(cur.segment())
            while seg.pos < len(seg.data):
                tc_th = seg.u8()
                tc, th = tc_th >> 4, tc_th & 15
                if tc > 1 or th > 3:
                    raise MalformedMarker("bad Huffman table class/id")
                bits = tuple(seg.take(16))
                vals = tuple(seg.take(sum(bits)))
                (dc_tables if tc == 0 else ac_tables)[th] = _HuffTable(bits, vals)
        elif marker in (SOF0, SOF1):
            if frame is not None:
                raise MalformedMarker("multiple frame headers")
            seg = _Cursor(cur.segment())
            precision, height, width, ncomp = seg.u8(), seg.u16(), seg.u16(), seg.u8()
            if precision != 8:
                raise UnsupportedFeature(f"{precision}-bit samples")
            if ncomp != 1:
                raise UnsupportedFeature(f"{ncomp}-component images")
            if height == 0:
                raise UnsupportedFeature("height defined by DNL")
            if width == 0:
                raise MalformedMarker("zero image width")
            cid, _sampling, tq = seg.u8(), seg.u8(), seg.u8()
            frame = (width, height, cid, tq)
        elif marker == DRI:
            seg = _Cursor(cur.segment())
            if seg.u16() != 0:
                raise UnsupportedFeature("restart intervals")
        elif 0xE0 <= marker <= 0xEF or marker == 0xFE:
            cur.segment()
        elif marker == SOS:
            if frame is None:
                raise MalformedMarker("SOS before SOF")
            seg = _Cursor(cur.segment())
            ns = seg.u8()
            if ns != 1:
                raise UnsupportedFeature(f"scan with {ns} components")
            cs, tables = seg.u8(), seg.u8()
            ss, se, ahal = seg.u8(), seg.u8(), seg.u8()
            if (ss, se, ahal) != (0, 63, 0):
                raise UnsupportedFeature("spectral selection / successive approximation")
            width, height, cid, tq = frame
            if cs != cid:
                raise MalformedMarker("scan references unknown component")
            if tq not in qtables:
                raise MalformedMarker("frame references missing quantization table")
            td, ta = tables >> 4, tables & 15
            if td not in dc_tables or ta not in ac_tables:
                raise MalformedMarker("scan references missing Huffman table")
            payload, end = _scan_data(data, cur.pos)
            blocks = _decode_scan(payload, width, height, dc_tables[td], ac_tables[ta])
            zz = np.asarray(qtables[tq])
            table = QuantTable(zz, _match_quality(zz[INV_ZIGZAG]))
            result = QuantizedImage(width, height, blocks, table)
            cur.pos = end
        else:
            raise MalformedMarker(f"unknown marker 0xFF{marker:02X}")


def _decode_scan(payload: bytes, width: int, height: int,
                 dc: _HuffTable, ac: _HuffTable) -> np.ndarray:
    by, bx = -(-height // 8), -(-width // 8)
    out = np.zeros((by * bx, 64), dtype=np.int32)
    br = _BitReader(payload)
    pred = 0
    for b in range(by * bx):
        zz = [0] * 64
        size = br.decode(dc)
        if size > 11:
            raise HuffmanDecodeError(f"DC category {size} out of range")
        pred += _extend(br.read_bits(size), size)
        if abs(pred) > MAX_DC:
            raise HuffmanDecodeError("DC predictor overflow")
        zz[0] = pred
        k = 1
        while k < 64:
            rs = br.decode(ac)
            run, size = rs >> 4, rs & 15
            if size == 0:
                if run == 15:
                    k += 16
                    continue
                if run == 0:
                    break
                raise HuffmanDecodeError(f"invalid AC symbol 0x{rs:02X}")
            k += run
            if k > 63 or size > 10:
                raise HuffmanDecodeError("AC coefficient index past end of block")
            zz[k] = _extend(br.read_bits(size), size)
            k += 1
        if k > 64:
            raise HuffmanDecodeError("zero run past end of block")
        out[b, ZIGZAG] = zz
    return out.reshape(by, bx, 8, 8)


# ---------------------------------------------------------------- file I/O

def read_pgm(path) -> np.ndarray:
    """Read an 8-bit grayscale raster (PGM P5 or anything Pillow opens as 8-bit)."""
    from PIL import Image

    with Image.open(path) as im:
        if im.mode not in ("L", "1", "P"):
            im = im.convert("L")
        return np.asarray(im.convert("L"), dtype=np.uint8).copy()


def write_pgm(path, raster: np.ndarray) -> None:
    """Write an 8-bit raster as binary PGM (P5)."""
    arr = np.asarray(raster)
    if arr.dtype != np.uint8:
        arr = to_uint8(arr)
    h, w = arr.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + arr.tobytes())


def read_jpeg(path) -> QuantizedImage:
    return parse_jpeg(Path(path).read_bytes())
