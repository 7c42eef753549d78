"""Post-capture raster processing on uint8 numpy arrays.

Images are ``(H, W)`` grayscale or ``(H, W, 3)`` RGB arrays. All integer
outputs are rounded half away from zero, which for non-negative intensities
is plain half-up.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import DomainError, ProtocolError


@dataclass(frozen=True)
class EntropyReport:
    value: float
    histogram: np.ndarray
    n_pixels: int


def _as_image(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        raise DomainError(f"expected 8-bit pixels, got dtype {arr.dtype}")
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
        raise DomainError(f"expected an (H, W) or (H, W, 3) array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DomainError(f"empty image of shape {arr.shape}")
    return arr


def channels(img) -> int:
    return 1 if np.ndim(img) == 2 else np.shape(img)[2]


def to_gray(img) -> np.ndarray:
    """ITU-R 601 luma (0.299, 0.587, 0.114) in exact integer arithmetic."""
    arr = _as_image(img)
    if arr.ndim == 2:
        return arr
    rgb = arr.astype(np.int64)
    weighted = 299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2]
    return ((weighted * 2 + 1000) // 2000).astype(np.uint8)


def margin_rows(height: int, vmargin: float) -> int:
    """Rows removed from each of the top and bottom edges."""
    return int(height * vmargin / 2 + 1e-9)


def cropped_height(height: int, vmargin: float) -> int:
    return height - 2 * margin_rows(height, vmargin)


def crop_vmargin(img, vmargin: float = 0.2) -> np.ndarray:
    """Drop ``floor(height * vmargin / 2)`` rows from both the top and the bottom."""
    arr = _as_image(img)
    if not 0 <= vmargin < 0.5:
        raise DomainError(f"vmargin must lie in [0, 0.5), got {vmargin}")
    height = arr.shape[0]
    if height < 2 and vmargin > 0:
        raise DomainError("image too short to crop a margin from")
    cut = margin_rows(height, vmargin)
    if height - 2 * cut < 1:
        raise DomainError(f"cropping {cut} rows per edge leaves nothing of {height}")
    return arr[cut:height - cut] if cut else arr


def _bilinear(plane: np.ndarray, width: int, height: int) -> np.ndarray:
    src_h, src_w = plane.shape[:2]
    # pixel-centre alignment: output pixel i samples source (i + 0.5) * s - 0.5
    ys = np.clip((np.arange(height) + 0.5) * (src_h / height) - 0.5, 0, src_h - 1)
    xs = np.clip((np.arange(width) + 0.5) * (src_w / width) - 0.5, 0, src_w - 1)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, src_h - 1)
    x1 = np.minimum(x0 + 1, src_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    if plane.ndim == 3:
        wy, wx = wy[..., None], wx[..., None]
    p = plane.astype(np.float64)
    top = p[y0][:, x0] * (1 - wx) + p[y0][:, x1] * wx
    bottom = p[y1][:, x0] * (1 - wx) + p[y1][:, x1] * wx
    out = top * (1 - wy) + bottom * wy
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def resize(img, target) -> np.ndarray:
    """Bilinear resample to ``target = (width, height, channels)``.

    3 -> 1 channels goes through :func:`to_gray`; 1 -> 3 replicates the plane.
    """
    arr = _as_image(img)
    width, height, n_channels = (int(v) for v in target)
    if width < 1 or height < 1 or n_channels not in (1, 3):
        raise DomainError(f"invalid resize target {target}")
    if n_channels == 1:
        arr = to_gray(arr)
    elif arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.shape[:2] == (height, width):
        return arr.copy()
    return _bilinear(arr, width, height)


def shannon_entropy(img) -> EntropyReport:
    """Entropy in bits of the grayscale intensity histogram (0 log 0 = 0)."""
    gray = to_gray(img)
    hist = np.bincount(gray.ravel(), minlength=256)
    n = int(gray.size)
    p = hist[hist > 0] / n
    value = float(-(p * np.log2(p)).sum()) + 0.0
    return EntropyReport(max(value, 0.0), hist, n)


def encode_png(img) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray(_as_image(img)).save(buf, format="PNG")
    return buf.getvalue()


def decode_image(data: bytes) -> np.ndarray:
    """Decode PNG/JPEG bytes to uint8 RGB (grayscale stays single-channel)."""
    try:
        with PILImage.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            return np.asarray(im).copy()
    except (OSError, ValueError) as exc:
        raise ProtocolError(f"payload is not a decodable image: {exc}") from None


def save_png(path, img) -> None:
    Path(path).write_bytes(encode_png(img))


def load_image(path) -> np.ndarray:
    return decode_image(Path(path).read_bytes())
