"""Disparity loading, stixel record files and overlay rendering.

Formats
-------
Disparity, binary: ``P5`` portable graymap. ``maxval < 256`` means one byte
per sample, otherwise two bytes big-endian. A sample ``raw`` maps to
disparity ``raw / scale``; ``raw == invalid_value`` is invalid.

Disparity, text: one image row per line (top row first), whitespace
separated floats holding disparities directly; ``nan`` marks an invalid
pixel. Lines starting with ``#`` are ignored.

Stixel records: plain text, one stixel per line, nine whitespace separated
fields::

    frame column x0 width vb vt class disparity cost

``frame`` is a token without whitespace, ``x0``/``width`` are the pixel
columns the stixel covers in the original image, ``vb``/``vt`` are model
rows (0 = bottom), ``class`` is ``ground``, ``object`` or ``sky``. Floats
are written with ``repr`` so they parse back exactly. Lines starting with
``#`` are comments.

Overlay: ``P6`` portable pixmap, 8 bits per channel.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import StixelClass
from .preprocess import DisparityImage

RECORD_HEADER = "# frame column x0 width vb vt class disparity cost"
_WS = b" \t\n\r\v\f"


class DisparityFormatError(ValueError):
    pass


@dataclass(frozen=True)
class DisparityFileHeader:
    tag: str
    width: int
    height: int
    maxval: int
    scale: float
    invalid_value: int
    data_offset: int


@dataclass(frozen=True)
class StixelRecord:
    frame: str
    column: int
    x0: int
    width: int
    vb: int
    vt: int
    cls: StixelClass
    disparity: float
    cost: float

    @property
    def height(self) -> int:
        return self.vt - self.vb + 1

    @property
    def area(self) -> int:
        return self.height * self.width

    def to_line(self) -> str:
        return (
            f"{self.frame} {self.column} {self.x0} {self.width} {self.vb} {self.vt} "
            f"{self.cls.label} {float(self.disparity)!r} {float(self.cost)!r}"
        )

    @classmethod
    def from_line(cls, line: str) -> "StixelRecord":
        parts = line.split()
        if len(parts) != 9:
            raise ValueError(f"expected 9 fields, got {len(parts)}")
        frame, column, x0, width, vb, vt, name, disp, cost = parts
        rec = cls(frame, int(column), int(x0), int(width), int(vb), int(vt),
                  StixelClass.parse(name), float(disp), float(cost))
        if rec.width < 1 or rec.vb < 0 or rec.vb > rec.vt:
            raise ValueError("malformed stixel span")
        return rec


# -- disparity input -------------------------------------------------------

def _read_token(buf: bytes, pos: int, path) -> tuple[bytes, int]:
    while True:
        while pos < len(buf) and buf[pos] in _WS:
            pos += 1
        if pos < len(buf) and buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        break
    start = pos
    while pos < len(buf) and buf[pos] not in _WS and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise DisparityFormatError(f"{path}: truncated header at byte {start}")
    return buf[start:pos], pos


def parse_pgm_header(buf: bytes, path="<bytes>", scale: float = 256.0, invalid_value: int = 65535) -> DisparityFileHeader:
    if buf[:2] != b"P5":
        raise DisparityFormatError(f"{path}: not a binary graymap (magic {buf[:2]!r} at byte 0)")
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        start = pos
        tok, pos = _read_token(buf, pos, path)
        if not tok.isdigit():
            raise DisparityFormatError(f"{path}: bad {name} {tok!r} at byte {start}")
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise DisparityFormatError(f"{path}: image dimensions must be positive, got {width}x{height}")
    if not 0 < maxval < 65536:
        raise DisparityFormatError(f"{path}: maxval {maxval} out of range")
    if width * height > 1 << 31:
        raise DisparityFormatError(f"{path}: dimensions {width}x{height} overflow")
    if pos >= len(buf) or buf[pos] not in _WS:
        raise DisparityFormatError(f"{path}: missing whitespace after header at byte {pos}")
    if not scale > 0:
        raise ValueError("scale must be positive")
    return DisparityFileHeader("P5", width, height, maxval, scale, invalid_value, pos + 1)


def read_pgm(path, scale: float = 256.0, invalid_value: int = 65535) -> tuple[DisparityFileHeader, np.ndarray]:
    buf = Path(path).read_bytes()
    hdr = parse_pgm_header(buf, path, scale, invalid_value)
    sample = 1 if hdr.maxval < 256 else 2
    need = hdr.width * hdr.height * sample
    have = len(buf) - hdr.data_offset
    if have < need:
        raise DisparityFormatError(
            f"{path}: truncated payload, expected {need} bytes from byte {hdr.data_offset}, "
            f"file ends at byte {len(buf)}"
        )
    dtype = np.uint8 if sample == 1 else np.dtype(">u2")
    raw = np.frombuffer(buf, dtype=dtype, count=hdr.width * hdr.height, offset=hdr.data_offset)
    return hdr, raw.reshape(hdr.height, hdr.width).astype(np.uint16)


def write_pgm(path, raw: np.ndarray, maxval: int = 65535) -> None:
    raw = np.asarray(raw)
    if raw.ndim != 2:
        raise ValueError("graymap must be 2D")
    if raw.min(initial=0) < 0 or raw.max(initial=0) > maxval:
        raise ValueError("sample outside [0, maxval]")
    h, w = raw.shape
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(raw.astype(dtype).tobytes())


def disparity_to_raw(img: DisparityImage, scale: float = 256.0, invalid_value: int = 65535) -> np.ndarray:
    raw = np.rint(np.nan_to_num(img.data, nan=0.0).astype(np.float64) * scale)
    if raw.max(initial=0) >= invalid_value and invalid_value > 0:
        raise ValueError("disparity collides with the invalid sentinel at this scale")
    raw = np.clip(raw, 0, 65535).astype(np.uint16)
    raw[np.isnan(img.data)] = invalid_value
    return raw


def read_disparity_text(path, d_range: int = 128) -> DisparityImage:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(t) for t in line.split()])
            except ValueError as exc:
                raise DisparityFormatError(f"{path}:{lineno}: {exc}") from None
            if len(rows[-1]) != len(rows[0]):
                raise DisparityFormatError(
                    f"{path}:{lineno}: row has {len(rows[-1])} values, expected {len(rows[0])}"
                )
    if not rows:
        raise DisparityFormatError(f"{path}: empty disparity matrix")
    return DisparityImage(np.array(rows, dtype=np.float64), d_range)


def write_disparity_text(img: DisparityImage, path) -> None:
    with open(path, "w") as fh:
        for row in img.data:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_disparity(path, scale: float = 256.0, invalid_value: int = 65535, d_range: int = 128) -> DisparityImage:
    """Load a binary graymap or text matrix, sniffing the format from the magic bytes."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such disparity file: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"P5":
        hdr, raw = read_pgm(path, scale, invalid_value)
        data = raw.astype(np.float64) / scale
        data[raw == invalid_value] = np.nan
    else:
        data = read_disparity_text(path, d_range).data.astype(np.float64)
    img = DisparityImage(data, d_range)
    bad = ~np.isnan(img.data) & ((img.data < 0) | (img.data >= d_range))
    if bad.any():
        r, c = map(int, np.argwhere(bad)[0])
        raise DisparityFormatError(f"{path}: disparity {img.data[r, c]} at row {r}, column {c} outside [0, {d_range})")
    return img


# -- stixel records --------------------------------------------------------

def records_from_columns(frame: str, cols, stixel_width: int) -> list[StixelRecord]:
    if re.search(r"\s", frame) or not frame:
        raise ValueError(f"frame id {frame!r} must be a non-empty token without whitespace")
    out = []
    for col in cols:
        for s in col.stixels:
            out.append(StixelRecord(frame, s.column, s.column * stixel_width, stixel_width,
                                    s.vb, s.vt, s.cls, s.disparity, s.cost))
    return out


def write_records(records, path) -> None:
    records = sorted(records, key=lambda r: (r.frame, r.column, r.vb))
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(RECORD_HEADER + "\n")
        for r in records:
            fh.write(r.to_line() + "\n")
    os.replace(tmp, path)


def write_stixels(cols, path, frame: str = "0", stixel_width: int = 1) -> None:
    write_records(records_from_columns(frame, cols, stixel_width), path)


def read_records(path) -> list[StixelRecord]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                out.append(StixelRecord.from_line(line))
            except ValueError as exc:
                raise DisparityFormatError(f"{path}:{lineno}: {exc}") from None
    return out


# -- overlay ---------------------------------------------------------------

SKY_COLOR = (0, 0, 255)
BORDER_COLOR = (0, 0, 0)


def object_color(f: float, f_min: float, f_max: float) -> tuple[int, int, int]:
    """Green (far) to red (near) ramp over the frame's object disparities."""
    t = 1.0 if f_max <= f_min else (f - f_min) / (f_max - f_min)
    t = min(max(t, 0.0), 1.0)
    return (int(round(255 * t)), int(round(255 * (1 - t))), 0)


def gray_image(img: DisparityImage) -> np.ndarray:
    g = np.nan_to_num(img.data.astype(np.float64), nan=0.0) * 255.0 / max(img.d_range - 1, 1)
    return np.clip(np.rint(g), 0, 255).astype(np.uint8)


def overlay_pixels(img: DisparityImage, cols, stixel_width: int) -> np.ndarray:
    """RGB overlay; ground is left as the gray disparity, object spans get a 1 px outline."""
    h = img.height
    rgb = np.repeat(gray_image(img)[:, :, None], 3, axis=2)
    objects = [s for c in cols for s in c.stixels if s.cls == StixelClass.OBJECT]
    f_min = min((s.disparity for s in objects), default=0.0)
    f_max = max((s.disparity for s in objects), default=0.0)
    for col in cols:
        for s in col.stixels:
            if s.cls == StixelClass.GROUND:
                continue
            x0 = s.column * stixel_width
            x1 = x0 + stixel_width
            r0, r1 = h - 1 - s.vt, h - 1 - s.vb  # storage rows, inclusive
            if s.cls == StixelClass.SKY:
                rgb[r0:r1 + 1, x0:x1] = SKY_COLOR
            else:
                rgb[r0:r1 + 1, x0:x1] = object_color(s.disparity, f_min, f_max)
                rgb[r0, x0:x1] = BORDER_COLOR
                rgb[r1, x0:x1] = BORDER_COLOR
    return rgb


def write_ppm(path, rgb: np.ndarray) -> None:
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


def read_ppm(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if buf[:2] != b"P6":
        raise DisparityFormatError(f"{path}: not a binary pixmap")
    pos = 2
    vals = []
    for _ in range(3):
        tok, pos = _read_token(buf, pos, path)
        vals.append(int(tok))
    w, h, _ = vals
    return np.frombuffer(buf, dtype=np.uint8, count=w * h * 3, offset=pos + 1).reshape(h, w, 3)


def render_overlay(img: DisparityImage, cols, path, stixel_width: int) -> None:
    write_ppm(path, overlay_pixels(img, cols, stixel_width))
