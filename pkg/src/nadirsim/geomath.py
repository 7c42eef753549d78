"""Camera footprint geometry and Web Mercator world-pixel / zoom math.

World coordinates are zoom-0 pixels: the whole Mercator square is 256x256,
origin at the north-west corner, x growing east and y growing south.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, OutOfWorldError

TILE_SIZE = 256
PIXELS_PER_RADIAN = TILE_SIZE / (2 * math.pi)  # alpha
DEG_TO_RAD = math.pi / 180  # beta
EARTH_CIRCUMFERENCE_M = 40_075_017
EQUATOR_M_PER_PX = EARTH_CIRCUMFERENCE_M / TILE_SIZE  # 156543.03...
MAX_LAT = 85.05112878
MIN_ZOOM, MAX_ZOOM = 0, 22
MAX_RES = 640

# tolerance for points that land a hair outside the world square after
# a float round trip
_WORLD_EPS = 1e-7


def normalize_lon(lon: float) -> float:
    """Map a longitude in [-180, 360) to [-180, 180). Exactly 180 is kept as an
    eastern bound so that whole-world boxes stay representable."""
    if not -180.0 <= lon < 360.0:
        raise DomainError(f"longitude {lon} outside [-180, 360)")
    if lon > 180.0:
        lon -= 360.0
    return lon


def round_half_up(value: float) -> int:
    return math.floor(value + 0.5)


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        lat, lon = float(self.lat), float(self.lon)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise DomainError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if abs(lat) > MAX_LAT:
            raise DomainError(
                f"latitude {lat} beyond the Mercator limit of +/-{MAX_LAT}"
            )
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", normalize_lon(lon))


@dataclass(frozen=True)
class MercatorPoint:
    x: float
    y: float


@dataclass(frozen=True)
class CameraSpec:
    fov_diag: float = 78.8
    aspect_w: int = 4
    aspect_h: int = 3

    def __post_init__(self):
        if not 0 < self.fov_diag < 180:
            raise DomainError(f"diagonal field of view {self.fov_diag} not in (0, 180)")
        for name in ("aspect_w", "aspect_h"):
            value = getattr(self, name)
            if int(value) != value or value <= 0:
                raise DomainError(f"{name} must be a positive integer, got {value}")
            object.__setattr__(self, name, int(value))


@dataclass(frozen=True)
class Footprint:
    diag_m: float
    width_m: float  # east-west
    height_m: float  # north-south


@dataclass(frozen=True)
class ZoomSpec:
    zoom: int
    res_x: int
    res_y: int

    def __post_init__(self):
        _check_zoom(self.zoom)
        for name in ("res_x", "res_y"):
            value = getattr(self, name)
            if int(value) != value or not 1 <= value <= MAX_RES:
                raise DomainError(f"{name}={value} outside [1, {MAX_RES}]")


@dataclass(frozen=True)
class GeoBBox:
    top_left: GeoPoint
    bottom_right: GeoPoint

    def __post_init__(self):
        tl, br = self.top_left, self.bottom_right
        if not tl.lat > br.lat:
            raise DomainError(
                f"top-left latitude {tl.lat} must be north of bottom-right {br.lat}"
            )
        if not tl.lon < br.lon:
            raise DomainError(
                f"top-left longitude {tl.lon} must be west of bottom-right {br.lon}"
                " (antimeridian crossing is not supported)"
            )

    @property
    def center(self) -> GeoPoint:
        return GeoPoint(
            (self.top_left.lat + self.bottom_right.lat) / 2,
            (self.top_left.lon + self.bottom_right.lon) / 2,
        )


def _check_zoom(zoom):
    if isinstance(zoom, bool) or int(zoom) != zoom or not MIN_ZOOM <= zoom <= MAX_ZOOM:
        raise DomainError(f"zoom {zoom} outside [{MIN_ZOOM}, {MAX_ZOOM}]")


def footprint_dims(agl: float, cam: CameraSpec) -> Footprint:
    """Ground rectangle seen by a nadir camera at ``agl`` meters."""
    if not agl > 0 or not math.isfinite(agl):
        raise DomainError(f"altitude above ground must be positive, got {agl}")
    diag = 2 * agl * math.tan(DEG_TO_RAD * cam.fov_diag / 2)
    theta = math.atan(cam.aspect_w / cam.aspect_h)
    return Footprint(diag, diag * math.sin(theta), diag * math.cos(theta))


def latlon_to_world(p: GeoPoint) -> MercatorPoint:
    x = TILE_SIZE / 2 + PIXELS_PER_RADIAN * DEG_TO_RAD * p.lon
    # (1/2) ln((1 + s) / (1 - s)) == atanh(s); north maps to smaller y
    y = TILE_SIZE / 2 - PIXELS_PER_RADIAN * math.atanh(math.sin(DEG_TO_RAD * p.lat))
    return MercatorPoint(x, min(max(y, 0.0), float(TILE_SIZE)))


def _unproject(x: float, y: float) -> tuple[float, float]:
    lon = (x - TILE_SIZE / 2) / (PIXELS_PER_RADIAN * DEG_TO_RAD)
    lat = math.asin(math.tanh((TILE_SIZE / 2 - y) / PIXELS_PER_RADIAN)) / DEG_TO_RAD
    return lat, lon


def world_to_latlon(m: MercatorPoint) -> GeoPoint:
    """Inverse of :func:`latlon_to_world`; the east edge x=256 wraps to -180."""
    lat, lon = _unproject(m.x, m.y)
    if lon >= 180.0:
        lon -= 360.0
    return GeoPoint(lat, lon)


def pixel_size(zoom: int) -> float:
    _check_zoom(zoom)
    return 2.0 ** -zoom


def meters_per_pixel(zoom: int, lat: float) -> float:
    return EQUATOR_M_PER_PX * math.cos(DEG_TO_RAD * lat) * pixel_size(zoom)


def tile_side_m(zoom: int) -> float:
    """Ground length of one 256-px tile side at the equator."""
    return EARTH_CIRCUMFERENCE_M * pixel_size(zoom)


def tile_width_deg(zoom: int) -> float:
    return 360.0 * pixel_size(zoom)


def bbox_from_center_zoom(center: GeoPoint, z: ZoomSpec) -> GeoBBox:
    """Geographic bounds of a ``res_x`` x ``res_y`` image centred on ``center``."""
    c = latlon_to_world(center)
    scale = pixel_size(z.zoom)
    half_x = z.res_x * scale / 2
    half_y = z.res_y * scale / 2
    x0, y0, x1, y1 = c.x - half_x, c.y - half_y, c.x + half_x, c.y + half_y
    if x0 < -_WORLD_EPS or y0 < -_WORLD_EPS or x1 > TILE_SIZE + _WORLD_EPS or y1 > TILE_SIZE + _WORLD_EPS:
        raise OutOfWorldError(
            f"image of {z.res_x}x{z.res_y} px at zoom {z.zoom} around "
            f"({center.lat}, {center.lon}) leaves the world tile"
        )

    def clip(v):
        return min(max(v, 0.0), float(TILE_SIZE))

    # unwrapped on purpose: a box touching the east edge must keep lon=+180
    tl = GeoPoint(*_unproject(clip(x0), clip(y0)))
    br = GeoPoint(*_unproject(clip(x1), clip(y1)))
    return GeoBBox(tl, br)


def world_extent(bbox: GeoBBox) -> tuple[float, float]:
    """Width and height of ``bbox`` in zoom-0 world pixels."""
    tl = latlon_to_world(bbox.top_left)
    br = latlon_to_world(bbox.bottom_right)
    return br.x - tl.x, br.y - tl.y


def zoom_from_bbox(bbox: GeoBBox, max_res: int = MAX_RES) -> ZoomSpec:
    """Largest zoom at which ``bbox`` fits in a ``max_res`` square image.

    Resolutions are rounded half-up and capped at ``max_res``.
    """
    if not 1 <= max_res <= MAX_RES:
        raise DomainError(f"max_res {max_res} outside [1, {MAX_RES}]")
    dx, dy = world_extent(bbox)
    if not (dx > 0 and dy > 0):
        raise DomainError(f"empty bounding box (world extent {dx} x {dy})")
    # the epsilon absorbs round-trip noise when the extent is an exact
    # power-of-two fraction of max_res
    zoom = math.floor(-math.log2(max(dx, dy) / max_res) + 1e-9)
    zoom = min(max(zoom, MIN_ZOOM), MAX_ZOOM)
    scale = 2.0 ** zoom
    res_x = min(max(round_half_up(dx * scale), 1), max_res)
    res_y = min(max(round_half_up(dy * scale), 1), max_res)
    return ZoomSpec(zoom, res_x, res_y)
