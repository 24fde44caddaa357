"""Image file IO: PNG (8/16 bit), Radiance RGBE .hdr, and raw float32 buffers.

Formats
-------
PNG       8- or 16-bit, 1/3/4 channels, encoded via the OpenCV codec. Payloads
          are floats in [0, 1]; ``transfer='srgb'`` applies the sRGB curve on
          write and removes it on read, ``'linear'`` stores values as-is.
.hdr      Radiance RGBE, header ``FORMAT=32-bit_rle_rgbe`` and resolution line
          ``-Y <h> +X <w>``. Decode rule: value * 2^(e - 136), exponent byte 0
          means black. New-style RLE and flat scanlines are supported.
float raw ``FRAW1`` text header followed by little-endian float32 planes:

              FRAW1
              width <int>
              height <int>
              channels <int>
              semantic <token>
              data
              <width*height*channels little-endian float32>

All writers are deterministic: no timestamps or varying metadata in the
payload bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np


class ImageFormatError(RuntimeError):
    """Raised for malformed or unsupported image files."""


@dataclass
class ImageBuffer:
    """Decoded image: float32 payload plus the declared encoding tags.

    ``data`` is (H, W) for single-channel images, (H, W, C) otherwise. For 8
    and 16 bit sources the payload is dequantized to [0, 1] (and linearized
    when ``transfer == 'srgb'``); 32-bit float sources are passed through.
    """

    data: np.ndarray
    bit_depth: int = 32
    transfer: str = "linear"
    semantic: str = ""

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]


# ---------------------------------------------------------------------------
# sRGB transfer (IEC 61966-2-1)

def srgb_encode(linear: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(linear, dtype=np.float64), 0.0, 1.0)
    low = x * 12.92
    high = 1.055 * np.power(x, 1.0 / 2.4) - 0.055
    return np.where(x <= 0.0031308, low, high)


def srgb_decode(encoded: np.ndarray) -> np.ndarray:
    y = np.clip(np.asarray(encoded, dtype=np.float64), 0.0, 1.0)
    low = y / 12.92
    high = np.power((y + 0.055) / 1.055, 2.4)
    return np.where(y <= 0.04045, low, high)


# ---------------------------------------------------------------------------
# PNG

def _to_bgr(arr: np.ndarray) -> np.ndarray:
    if arr.ndim == 2:
        return arr
    if arr.shape[2] == 3:
        return arr[:, :, ::-1]
    if arr.shape[2] == 4:
        return arr[:, :, [2, 1, 0, 3]]
    raise ImageFormatError(f"unsupported channel count {arr.shape[2]}")


def write_png(path, image, *, bit_depth: int = 8, transfer: str = "linear") -> None:
    """Quantize a float image in [0, 1] and write it as PNG.

    Values outside [0, 1] are clipped. ``transfer='srgb'`` applies the sRGB
    curve before quantization (display-referred bytes, linear payload in).
    """
    if isinstance(image, ImageBuffer):
        image = image.data
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise ImageFormatError(f"expected 2D or 3D image, got shape {arr.shape}")
    if transfer == "srgb":
        arr = srgb_encode(arr)
    elif transfer != "linear":
        raise ImageFormatError(f"unknown transfer {transfer!r}")
    if bit_depth == 8:
        q = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    elif bit_depth == 16:
        q = np.rint(np.clip(arr, 0.0, 1.0) * 65535.0).astype(np.uint16)
    else:
        raise ImageFormatError(f"PNG bit depth must be 8 or 16, got {bit_depth}")
    ok = cv2.imwrite(str(path), _to_bgr(q))
    if not ok:
        raise ImageFormatError(f"failed to write PNG {path}")


def read_png(path, *, transfer: str = "linear") -> ImageBuffer:
    """Read a PNG and dequantize to float32. ``transfer`` declares how the
    stored bytes are to be interpreted; PNG itself is not trusted for it."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageFormatError(f"cannot read PNG {path}")
    if raw.dtype == np.uint8:
        depth, scale = 8, 255.0
    elif raw.dtype == np.uint16:
        depth, scale = 16, 65535.0
    else:
        raise ImageFormatError(f"unsupported PNG sample type {raw.dtype} in {path}")
    if raw.ndim == 3:
        raw = _to_bgr(raw)  # BGR -> RGB (involution)
    arr = raw.astype(np.float64) / scale
    if transfer == "srgb":
        arr = srgb_decode(arr)
    elif transfer != "linear":
        raise ImageFormatError(f"unknown transfer {transfer!r}")
    return ImageBuffer(arr.astype(np.float32), bit_depth=depth, transfer=transfer)


# ---------------------------------------------------------------------------
# Radiance RGBE

_HDR_FORMAT = "32-bit_rle_rgbe"


def _rgbe_to_float(rgbe: np.ndarray) -> np.ndarray:
    # value * 2^(e - 136); exponent byte 0 encodes black regardless of mantissa
    e = rgbe[..., 3].astype(np.int32)
    scale = np.where(e == 0, 0.0, np.ldexp(1.0, e - 136))
    return (rgbe[..., :3].astype(np.float32) * scale[..., None].astype(np.float32))


def _float_to_rgbe(rgb: np.ndarray) -> np.ndarray:
    m = rgb.max(axis=-1)
    out = np.zeros(rgb.shape[:-1] + (4,), dtype=np.uint8)
    nz = m > 1e-32
    if not np.any(nz):
        return out
    frac, expo = np.frexp(m[nz])  # m = frac * 2^expo, frac in [0.5, 1)
    del frac
    ebyte = expo + 128
    scale = np.ldexp(1.0, 136 - ebyte)
    mant = np.rint(rgb[nz] * scale[:, None]).astype(np.int64)
    out[nz, :3] = np.clip(mant, 0, 255).astype(np.uint8)
    out[nz, 3] = ebyte.astype(np.uint8)
    return out


def _decode_rle_scanline(buf: memoryview, pos: int, width: int, row: int) -> tuple[np.ndarray, int]:
    line = np.empty((width, 4), dtype=np.uint8)
    for c in range(4):
        x = 0
        while x < width:
            if pos >= len(buf):
                raise ImageFormatError(f"truncated RLE data in scanline {row}")
            n = buf[pos]
            pos += 1
            if n > 128:  # run of a repeated byte
                n -= 128
                if pos >= len(buf) or x + n > width:
                    raise ImageFormatError(f"RLE run overflow in scanline {row}")
                line[x:x + n, c] = buf[pos]
                pos += 1
            else:  # literal span
                if n == 0 or x + n > width or pos + n > len(buf):
                    raise ImageFormatError(f"bad RLE literal in scanline {row}")
                line[x:x + n, c] = np.frombuffer(buf[pos:pos + n], dtype=np.uint8)
                pos += n
            x += n
    return line, pos


def read_hdr(path) -> ImageBuffer:
    """Decode a Radiance RGBE file to linear float32 RGB."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(b"#?"):
        raise ImageFormatError(f"{path}: missing #? magic")
    # header: lines up to the first empty line, then the resolution line
    pos = 0
    fmt_seen = None
    while True:
        nl = blob.find(b"\n", pos)
        if nl < 0:
            raise ImageFormatError(f"{path}: unterminated header")
        line = blob[pos:nl].decode("ascii", "replace").strip()
        pos = nl + 1
        if line.startswith("FORMAT="):
            fmt_seen = line.split("=", 1)[1]
        if line == "":
            break
    if fmt_seen != _HDR_FORMAT:
        raise ImageFormatError(f"{path}: FORMAT must be {_HDR_FORMAT}, got {fmt_seen!r}")
    nl = blob.find(b"\n", pos)
    if nl < 0:
        raise ImageFormatError(f"{path}: missing resolution line")
    dims = blob[pos:nl].decode("ascii", "replace").split()
    pos = nl + 1
    if len(dims) != 4 or dims[0] != "-Y" or dims[2] != "+X":
        raise ImageFormatError(f"{path}: only '-Y <h> +X <w>' orientation is supported")
    height, width = int(dims[1]), int(dims[3])
    if height <= 0 or width <= 0:
        raise ImageFormatError(f"{path}: bad dimensions {width}x{height}")

    buf = memoryview(blob)
    rgbe = np.empty((height, width, 4), dtype=np.uint8)
    for row in range(height):
        if pos + 4 > len(buf):
            raise ImageFormatError(f"{path}: truncated scanline {row}")
        h0, h1, h2, h3 = buf[pos], buf[pos + 1], buf[pos + 2], buf[pos + 3]
        if h0 == 2 and h1 == 2 and (h2 << 8 | h3) == width and width >= 8:
            line, pos = _decode_rle_scanline(buf, pos + 4, width, row)
            rgbe[row] = line
        else:  # flat scanline of width RGBE quads
            end = pos + 4 * width
            if end > len(buf):
                raise ImageFormatError(f"{path}: truncated scanline {row}")
            rgbe[row] = np.frombuffer(buf[pos:end], dtype=np.uint8).reshape(width, 4)
            pos = end
    return ImageBuffer(_rgbe_to_float(rgbe), bit_depth=32, transfer="linear")


def _encode_rle_channel(vals: np.ndarray) -> bytes:
    # new-style RLE: (128+n, byte) repeats, (n, bytes...) literals, n <= 127/128
    out = bytearray()
    x = 0
    w = len(vals)
    while x < w:
        run = 1
        while x + run < w and run < 127 and vals[x + run] == vals[x]:
            run += 1
        if run >= 4:
            out.append(128 + run)
            out.append(int(vals[x]))
            x += run
        else:
            lit_end = x + 1
            while lit_end < w and lit_end - x < 128:
                nxt = 1
                while lit_end + nxt < w and nxt < 4 and vals[lit_end + nxt] == vals[lit_end]:
                    nxt += 1
                if nxt >= 4:
                    break
                lit_end += 1
            out.append(lit_end - x)
            out.extend(vals[x:lit_end].tobytes())
            x = lit_end
    return bytes(out)


def write_hdr(path, rgb: np.ndarray) -> None:
    """Encode linear RGB radiance as a Radiance RGBE file (RLE scanlines)."""
    arr = np.asarray(rgb, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ImageFormatError(f"expected (H, W, 3) radiance, got {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0:
        raise ImageFormatError("HDR payload must be finite and non-negative")
    height, width = arr.shape[:2]
    rgbe = _float_to_rgbe(arr)
    use_rle = 8 <= width < 32768
    with open(path, "wb") as fh:
        fh.write(b"#?RADIANCE\n")
        fh.write(f"FORMAT={_HDR_FORMAT}\n\n".encode("ascii"))
        fh.write(f"-Y {height} +X {width}\n".encode("ascii"))
        for row in range(height):
            if use_rle:
                fh.write(bytes([2, 2, width >> 8, width & 0xFF]))
                for c in range(4):
                    fh.write(_encode_rle_channel(rgbe[row, :, c]))
            else:
                fh.write(rgbe[row].tobytes())


# ---------------------------------------------------------------------------
# float32 raw

_FRAW_MAGIC = "FRAW1"


def write_float_raw(path, image, *, semantic: str = "") -> None:
    if isinstance(image, ImageBuffer):
        semantic = semantic or image.semantic
        image = image.data
    arr = np.asarray(image, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ImageFormatError(f"expected 2D or 3D image, got shape {arr.shape}")
    if semantic and any(ch.isspace() for ch in semantic):
        raise ImageFormatError(f"semantic must be a single token, got {semantic!r}")
    h, w, c = arr.shape
    header = (
        f"{_FRAW_MAGIC}\nwidth {w}\nheight {h}\nchannels {c}\n"
        f"semantic {semantic or 'none'}\ndata\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_float_raw(path, *, validate: bool = False) -> ImageBuffer:
    """Read a FRAW1 buffer. NaN bits pass through untouched; ``validate``
    raises if the payload contains non-finite samples."""
    with open(path, "rb") as fh:
        blob = fh.read()
    head_end = blob.find(b"\ndata\n")  # 'data' on its own line ends the header
    if head_end < 0 or not blob.startswith(_FRAW_MAGIC.encode("ascii")):
        raise ImageFormatError(f"{path}: not a {_FRAW_MAGIC} file")
    fields = {}
    for line in blob[:head_end].decode("ascii", "replace").splitlines()[1:]:
        if line.strip():
            key, _, val = line.partition(" ")
            fields[key] = val.strip()
    try:
        w = int(fields["width"])
        h = int(fields["height"])
        c = int(fields["channels"])
    except (KeyError, ValueError) as exc:
        raise ImageFormatError(f"{path}: malformed header") from exc
    payload = blob[head_end + 6:]
    expect = w * h * c * 4
    if len(payload) != expect:
        raise ImageFormatError(
            f"{path}: payload is {len(payload)} bytes, header promises {expect}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(h, w, c).copy()
    if validate and not np.all(np.isfinite(arr)):
        bad = int(np.count_nonzero(~np.isfinite(arr)))
        raise ImageFormatError(f"{path}: {bad} non-finite samples")
    if c == 1:
        arr = arr[:, :, 0]
    return ImageBuffer(arr, bit_depth=32, transfer="linear",
                       semantic=fields.get("semantic", ""))
