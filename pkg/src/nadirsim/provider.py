"""Image acquisition backends: a static-maps HTTPS client and an offline mock.

Both expose ``fetch(spec, retry) -> ProviderResult``.

URL query parameters are emitted in this fixed order::

    center={lat:.6f},{lon:.6f} & zoom & size={w}x{h} & maptype [& style] & key
"""

from __future__ import annotations

import logging
import os
import random
import time
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import quote

import numpy as np
import requests

from .errors import AuthError, ConfigError, DomainError, ProtocolError, TransportError
from .geomath import MAX_RES, MAX_ZOOM, MIN_ZOOM, GeoPoint, latlon_to_world, round_half_up
from .imaging import cropped_height, decode_image
from .mission import MAP_TYPES

log = logging.getLogger(__name__)

STATIC_MAP_URL = "https://maps.googleapis.com/maps/api/staticmap"
HIDE_LABELS_STYLE = "feature:all|element:labels|visibility:off"
API_KEY_ENV = "NADIRSIM_API_KEY"
API_KEY_FILE = ".api_key"
RETRYABLE_STATUS = frozenset({408, 429, 500, 502, 503, 504})


@dataclass(frozen=True)
class CaptureSpec:
    center: GeoPoint
    zoom: int
    res_x: int
    res_y: int
    map_type: str = "satellite"
    hide_labels: bool = True
    scale: int = 1

    def __post_init__(self):
        if self.map_type not in MAP_TYPES:
            raise DomainError(f"map type {self.map_type!r} not one of {MAP_TYPES}")
        if isinstance(self.zoom, bool) or int(self.zoom) != self.zoom or not MIN_ZOOM <= self.zoom <= MAX_ZOOM:
            raise DomainError(f"zoom {self.zoom} outside [{MIN_ZOOM}, {MAX_ZOOM}]")
        for name in ("res_x", "res_y"):
            value = getattr(self, name)
            if int(value) != value or not 1 <= value <= MAX_RES:
                raise DomainError(f"{name}={value} outside [1, {MAX_RES}]")
        if self.scale != 1:
            raise DomainError("only scale=1 is supported")


@dataclass
class ProviderResult:
    image: np.ndarray
    content_type: str
    attempts: int


def margin_height(res_y: int, vmargin: float, cap: int = MAX_RES) -> tuple[int, int]:
    """Rows to request so that cropping ``vmargin`` leaves ``res_y`` rows.

    Starts from ``round(res_y / (1 - vmargin))`` and nudges to the nearest
    height whose symmetric floor crop gives exactly ``res_y``. Returns
    ``(request_height, shortfall)``; the shortfall is non-zero only when the
    request had to be clamped at ``cap``.
    """
    if vmargin == 0:
        return min(res_y, cap), max(res_y - cap, 0)
    guess = round_half_up(res_y / (1 - vmargin))
    for delta in (0, -1, 1, -2, 2, -3, 3):
        h = guess + delta
        if 1 <= h <= cap and cropped_height(h, vmargin) == res_y:
            return h, 0
    if guess >= cap:
        return cap, res_y - cropped_height(cap, vmargin)
    return guess, res_y - cropped_height(guess, vmargin)


def build_url(spec: CaptureSpec, key: str, base_url: str = STATIC_MAP_URL) -> str:
    if not key:
        raise ConfigError(f"no API key: pass one, set ${API_KEY_ENV} or create {API_KEY_FILE}")
    params = [
        ("center", f"{spec.center.lat:.6f},{spec.center.lon:.6f}"),
        ("zoom", str(spec.zoom)),
        ("size", f"{spec.res_x}x{spec.res_y}"),
        ("maptype", spec.map_type),
    ]
    if spec.hide_labels:
        params.append(("style", HIDE_LABELS_STYLE))
    params.append(("key", key))
    query = "&".join(f"{name}={quote(value, safe=',:')}" for name, value in params)
    return f"{base_url}?{query}"


def resolve_api_key(explicit: str | None = None, environ=None, secrets_file=API_KEY_FILE) -> str | None:
    """Explicit argument, then environment variable, then the first line of a
    local secrets file."""
    if explicit:
        return explicit
    environ = os.environ if environ is None else environ
    if environ.get(API_KEY_ENV):
        return environ[API_KEY_ENV]
    path = Path(secrets_file)
    if path.is_file():
        lines = path.read_text(encoding="utf-8").split()
        return lines[0] if lines else None
    return None


def _redact(url: str, key: str) -> str:
    return url.replace(quote(key, safe=",:"), "REDACTED") if key else url


class StaticMapProvider:
    def __init__(self, key, *, session=None, base_url=STATIC_MAP_URL, timeout=30.0,
                 backoff_base=1.0, backoff_factor=2.0, jitter=0.2, sleep=time.sleep, rng=None):
        if not key:
            raise ConfigError(f"no API key: pass one, set ${API_KEY_ENV} or create {API_KEY_FILE}")
        self.key = key
        self.session = session or requests.Session()
        self.base_url = base_url
        self.timeout = timeout
        self.backoff_base = backoff_base
        self.backoff_factor = backoff_factor
        self.jitter = jitter
        self.sleep = sleep
        self.rng = rng or random.Random()

    def __repr__(self):
        return f"StaticMapProvider(base_url={self.base_url!r})"

    def backoff(self, failures: int) -> float:
        delay = self.backoff_base * self.backoff_factor ** (failures - 1)
        return delay * self.rng.uniform(1 - self.jitter, 1 + self.jitter)

    def fetch(self, spec: CaptureSpec, retry: int = 3) -> ProviderResult:
        if retry < 0:
            raise DomainError(f"retry must be >= 0, got {retry}")
        url = build_url(spec, self.key, self.base_url)
        safe_url = _redact(url, self.key)
        status = None
        for attempt in range(1, retry + 2):
            try:
                resp = self.session.get(url, timeout=self.timeout)
            except requests.RequestException as exc:
                status = None
                log.warning("attempt %d for %s failed: %s", attempt, safe_url, type(exc).__name__)
            else:
                status = resp.status_code
                if status == 403:
                    raise AuthError(f"HTTP 403 for {safe_url}: key rejected or quota exhausted")
                if status == 200:
                    return self._decode(resp, safe_url, attempt)
                if status not in RETRYABLE_STATUS:
                    raise TransportError(f"HTTP {status} for {safe_url}", status, attempt)
                log.warning("attempt %d for %s got HTTP %d", attempt, safe_url, status)
            if attempt <= retry:
                self.sleep(self.backoff(attempt))
        raise TransportError(
            f"giving up on {safe_url} after {retry + 1} attempts (last status {status})",
            status, retry + 1,
        )

    @staticmethod
    def _decode(resp, safe_url, attempts) -> ProviderResult:
        content_type = resp.headers.get("Content-Type", "")
        if not content_type.startswith("image/"):
            raise ProtocolError(f"{safe_url} returned {content_type or 'no content type'}, not an image")
        image = decode_image(resp.content)
        if image.ndim == 2:
            image = np.repeat(image[:, :, None], 3, axis=2)
        return ProviderResult(image, content_type, attempts)


# -- offline mock -------------------------------------------------------------

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_MAP_SALT = {"satellite": 0x5A7E, "roadmap": 0x40AD, "terrain": 0x7E44}


def _mix(x):
    """splitmix64 finaliser, elementwise on uint64 arrays."""
    with np.errstate(over="ignore"):
        x = x + np.uint64(0x9E3779B97F4A7C15)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return (x ^ (x >> np.uint64(31))) & _MASK64


def _cell_hash(ix, iy, salt):
    return _mix(ix.astype(np.int64).astype(np.uint64) ^ _mix(iy.astype(np.int64).astype(np.uint64) ^ np.uint64(salt)))


def mock_render(spec: CaptureSpec, seed: int = 2024, density: float = 1.0) -> ProviderResult:
    """Deterministic synthetic map image.

    Pixels are sampled from a texture anchored to global pixel coordinates at
    the requested zoom, so overlapping or adjacent requests agree on shared
    ground. ``density`` in [0, 1] is the share of texture cells that carry
    features; 0 yields a uniform image.
    """
    if not 0 <= density <= 1:
        raise DomainError(f"density must lie in [0, 1], got {density}")
    world = latlon_to_world(spec.center)
    scale = 2 ** spec.zoom
    x0 = round_half_up(world.x * scale - spec.res_x / 2)
    y0 = round_half_up(world.y * scale - spec.res_y / 2)
    gx = (x0 + np.arange(spec.res_x, dtype=np.int64))[None, :]
    gy = (y0 + np.arange(spec.res_y, dtype=np.int64))[:, None]
    salt = (int(seed) * 0x1000193 + spec.zoom * 0x100 + _MAP_SALT[spec.map_type]) & 0xFFFFFFFFFFFFFFFF

    cell = 8 if spec.map_type == "satellite" else 16
    h = _cell_hash(gx // cell, gy // cell, salt)
    featured = (h & np.uint64(0xFFFF)).astype(np.float64) < density * 65536.0
    level = ((h >> np.uint64(16)) & np.uint64(0xFF)).astype(np.int64)

    shape = (spec.res_y, spec.res_x)
    if spec.map_type == "satellite":
        base = np.array([74, 92, 58])
        fine = (_cell_hash(gx, gy, salt ^ 0xF1E) & np.uint64(0x3F)).astype(np.int64)
        value = level // 2 + fine
        tex = np.stack([value * 3 // 4 + 20, value * 7 // 8 + 30, value // 2 + 15], axis=-1)
    elif spec.map_type == "roadmap":
        base = np.array([236, 233, 226])
        palette = np.array([[255, 255, 255], [250, 222, 150], [200, 200, 204], [170, 218, 170],
                            [156, 192, 249], [222, 210, 196], [240, 240, 236], [212, 226, 208]])
        tex = palette[level % len(palette)]
    else:
        base = np.array([226, 220, 204])
        tex = np.stack([150 + level // 3, 160 + level // 4, 120 + level // 3], axis=-1)

    img = np.empty(shape + (3,), dtype=np.int64)
    img[...] = base
    mask = np.broadcast_to(featured, shape)
    img[mask] = np.broadcast_to(tex, shape + (3,))[mask]
    if density > 0:
        # tile borders stand in for a graticule: they are lines of constant
        # longitude and latitude
        grid = np.broadcast_to((gx % 256 == 0) | (gy % 256 == 0), shape)
        img[grid] = (96, 96, 96)
    return ProviderResult(np.clip(img, 0, 255).astype(np.uint8), "image/png", 1)


class MockProvider:
    def __init__(self, seed: int = 2024, density: float = 1.0):
        self.seed = seed
        self.density = density

    def __repr__(self):
        return f"MockProvider(seed={self.seed}, density={self.density})"

    def fetch(self, spec: CaptureSpec, retry: int = 0) -> ProviderResult:
        if retry < 0:
            raise DomainError(f"retry must be >= 0, got {retry}")
        return mock_render(spec, self.seed, self.density)
