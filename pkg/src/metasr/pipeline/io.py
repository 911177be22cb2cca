"""Image containers and portable-format I/O.

Binary and ASCII Netpbm (PGM/PPM, 8 or 16 bit) are handled natively; PNG goes
through Pillow.  Pixel values are always exposed on a real [0, 255] scale.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError, ImageFormatError, TruncatedImageError

NETPBM_SUFFIXES = {".pgm", ".ppm", ".pnm"}
SUPPORTED_SUFFIXES = NETPBM_SUFFIXES | {".png"}
MANIFEST_NAME = "manifest.txt"


@dataclass
class Image:
    pixels: np.ndarray
    bit_depth: int = 8

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim == 3 and self.pixels.shape[2] == 1:
            self.pixels = self.pixels[:, :, 0]
        if self.pixels.ndim not in (2, 3) or (self.pixels.ndim == 3 and self.pixels.shape[2] != 3):
            raise ImageFormatError(f"image must be HxW or HxWx3, got shape {self.pixels.shape}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _parse_netpbm(buf: bytes, source: str) -> Image:
    magic = buf[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise ImageFormatError(f"{source}: unsupported Netpbm variant {magic!r}")
    pos = 2
    header = []
    for _ in range(3):
        m = _TOKEN.match(buf, pos)
        if m is None:
            raise ImageFormatError(f"{source}: malformed header")
        try:
            header.append(int(m.group(1)))
        except ValueError:
            raise ImageFormatError(f"{source}: malformed header token {m.group(1)!r}") from None
        pos = m.end()
    width, height, maxval = header
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ImageFormatError(f"{source}: invalid header values {header}")
    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels

    if magic in (b"P5", b"P6"):
        if pos >= len(buf) or not buf[pos:pos + 1].isspace():
            raise TruncatedImageError(f"{source}: missing raster")
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = count * dtype.itemsize
        if len(buf) - pos < need:
            raise TruncatedImageError(f"{source}: raster holds {len(buf) - pos} bytes, expected {need}")
        raw = np.frombuffer(buf, dtype=dtype, count=count, offset=pos)
    else:
        tokens = buf[pos:].split()
        if len(tokens) < count:
            raise TruncatedImageError(f"{source}: {len(tokens)} samples, expected {count}")
        try:
            raw = np.array([int(t) for t in tokens[:count]])
        except ValueError:
            raise ImageFormatError(f"{source}: non-integer sample in raster") from None
    if raw.max(initial=0) > maxval:
        raise ImageFormatError(f"{source}: sample exceeds maxval {maxval}")
    shape = (height, width) if channels == 1 else (height, width, 3)
    values = raw.reshape(shape).astype(np.float64)
    if maxval != 255:
        values *= 255.0 / maxval
    return Image(values, bit_depth=8 if maxval < 256 else 16)


def _load_png(path: Path) -> Image:
    from PIL import Image as PILImage, UnidentifiedImageError

    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.float64) * (255.0 / 65535.0)
                return Image(arr, bit_depth=16)
            if mode == "L":
                return Image(np.asarray(im, dtype=np.float64))
            if mode in ("RGB", "RGBA", "P"):
                return Image(np.asarray(im.convert("RGB"), dtype=np.float64))
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageFormatError(f"{path}: {exc}") from None
    raise ImageFormatError(f"{path}: unsupported PNG mode {mode}")


def load_image(path) -> Image:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in SUPPORTED_SUFFIXES:
        raise ImageFormatError(f"{path}: unsupported file type {suffix!r}")
    if suffix == ".png":
        return _load_png(path)
    return _parse_netpbm(path.read_bytes(), str(path))


def _quantize(pixels: np.ndarray, bit_depth: int) -> np.ndarray:
    clipped = np.clip(pixels, 0.0, 255.0)
    if bit_depth == 16:
        return np.rint(clipped * (65535.0 / 255.0)).astype(">u2")
    return np.rint(clipped).astype(np.uint8)


def save_image(img: Image | np.ndarray, path, bit_depth: int | None = None) -> None:
    """Write ``img`` rounded to integers; values outside [0, 255] are clipped."""
    if not isinstance(img, Image):
        img = Image(img)
    depth = bit_depth or img.bit_depth
    if depth not in (8, 16):
        raise ImageFormatError(f"unsupported bit depth {depth}")
    path = Path(path)
    suffix = path.suffix.lower()
    q = _quantize(img.pixels, depth)
    if suffix in NETPBM_SUFFIXES:
        if suffix == ".pgm" and img.channels != 1:
            raise ImageFormatError(f"{path}: PGM holds grayscale only")
        magic = b"P5" if img.channels == 1 else b"P6"
        maxval = 65535 if depth == 16 else 255
        header = b"%s\n%d %d\n%d\n" % (magic, img.width, img.height, maxval)
        path.write_bytes(header + q.tobytes())
    elif suffix == ".png":
        from PIL import Image as PILImage

        if depth == 16:
            if img.channels != 1:
                raise ImageFormatError(f"{path}: 16-bit PNG output supports grayscale only")
            PILImage.fromarray(q.astype(np.uint16)).save(path)
        else:
            PILImage.fromarray(q).save(path)
    else:
        raise ImageFormatError(f"{path}: unsupported file type {suffix!r}")


def list_images(directory) -> list[Path]:
    """Images in ``directory``: the manifest's entries if one exists, else every supported file."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"{directory}: not a directory")
    manifest = directory / MANIFEST_NAME
    if manifest.exists():
        entries = []
        for line in manifest.read_text().splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                entries.append(directory / line)
        missing = [str(p) for p in entries if not p.exists()]
        if missing:
            raise DataError(f"manifest lists missing files: {', '.join(missing)}")
        return entries
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in SUPPORTED_SUFFIXES)


def load_dataset(directory) -> list[tuple[Path, Image]]:
    paths = list_images(directory)
    if not paths:
        raise DataError(f"{directory}: no loadable images")
    out = []
    for p in paths:
        try:
            out.append((p, load_image(p)))
        except ImageFormatError as exc:
            raise DataError(str(exc)) from exc
    return out


def relative_name(path: Path, root) -> str:
    try:
        return os.fspath(Path(path).relative_to(root))
    except ValueError:
        return os.fspath(path)
