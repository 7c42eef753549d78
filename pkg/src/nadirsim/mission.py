"""Mission planning: single shots, point lists and raster (lawnmower) coverage."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

from geopy.distance import geodesic

from .errors import DomainError, ParseError
from .geodesy import UtmCoord, bbox_from_meters, latlon_to_utm, utm_to_latlon
from .geomath import (
    CameraSpec,
    Footprint,
    GeoBBox,
    GeoPoint,
    ZoomSpec,
    footprint_dims,
    zoom_from_bbox,
)

MAP_TYPES = ("satellite", "roadmap", "terrain")
# cells per axis given span/step, with the first footprint centred on the
# near corner:
#   cover     - fewest cells whose footprints reach the far edge,
#               ceil(span/step - 1/2) + 1
#   inclusive - floor + 1, every centre at or before the far edge
#   truncate  - floor, stop before the step that would pass the far edge
#   ceil      - ceil, one cell per started step
EDGE_RULES = ("cover", "inclusive", "truncate", "ceil")
# how the raster extent is measured before dividing by the step:
#   utm      - easting/northing differences of the two corners in the pinned zone
#   geodesic - ellipsoidal lengths of the north and west edges of the box
SPAN_METRICS = ("utm", "geodesic")

RASTER_GRAMMAR = '"{latTL}_{lonTL}_{latBR}_{lonBR}_{agl}"'
SINGLE_GRAMMAR = '"{lat}_{lon}_{agl}"'


@dataclass(frozen=True)
class MissionSpec:
    kind: str
    agl: float | None = None
    cam: CameraSpec = field(default_factory=CameraSpec)
    overlap: float = 0.0
    map_type: str = "satellite"
    bbox: GeoBBox | None = None
    points: tuple[tuple[GeoPoint, float], ...] = ()
    edge_rule: str = "cover"
    span_metric: str = "utm"

    def __post_init__(self):
        if self.kind not in ("single", "list", "raster"):
            raise DomainError(f"unknown mission kind {self.kind!r}")
        if not 0 <= self.overlap < 1:
            raise DomainError(f"overlap must lie in [0, 1), got {self.overlap}")
        if self.map_type not in MAP_TYPES:
            raise DomainError(f"map type {self.map_type!r} not one of {MAP_TYPES}")
        if self.edge_rule not in EDGE_RULES:
            raise DomainError(f"edge rule {self.edge_rule!r} not one of {EDGE_RULES}")
        if self.span_metric not in SPAN_METRICS:
            raise DomainError(f"span metric {self.span_metric!r} not one of {SPAN_METRICS}")
        if self.kind == "raster":
            if self.bbox is None:
                raise DomainError("raster mission needs a bounding box")
            _check_agl(self.agl)
        elif not self.points:
            raise DomainError(f"{self.kind} mission needs at least one point")


@dataclass(frozen=True)
class Waypoint:
    row: int
    col: int
    center: GeoPoint
    zoom: int
    res_x: int
    res_y: int
    agl: float
    # planar lattice position, raster missions only
    easting: float | None = None
    northing: float | None = None


@dataclass(frozen=True)
class MissionPlan:
    spec: MissionSpec
    waypoints: tuple[Waypoint, ...]
    n_rows: int
    n_cols: int
    utm_zone: int | None = None
    hemisphere: str | None = None
    footprint: Footprint | None = None
    step_x: float | None = None
    step_y: float | None = None

    def __len__(self):
        return len(self.waypoints)


def _check_agl(agl):
    if agl is None or not agl > 0 or not math.isfinite(agl):
        raise DomainError(f"altitude above ground must be positive, got {agl}")


def capture_settings(center: GeoPoint, agl: float, cam: CameraSpec) -> tuple[ZoomSpec, Footprint]:
    """Zoom and image size that frame the camera footprint around ``center``."""
    fp = footprint_dims(agl, cam)
    return zoom_from_bbox(bbox_from_meters(center, fp)), fp


def plan_single(center: GeoPoint, agl: float, cam: CameraSpec = CameraSpec(),
                map_type: str = "satellite") -> MissionPlan:
    _check_agl(agl)
    spec = MissionSpec("single", agl=agl, cam=cam, map_type=map_type,
                       points=((center, agl),))
    z, fp = capture_settings(center, agl, cam)
    wp = Waypoint(0, 0, center, z.zoom, z.res_x, z.res_y, agl)
    return MissionPlan(spec, (wp,), 1, 1, footprint=fp)


def plan_list(points, cam: CameraSpec = CameraSpec(), map_type: str = "satellite") -> MissionPlan:
    """One waypoint per ``(GeoPoint, agl)`` pair, in input order."""
    points = tuple(points)
    if not points:
        raise DomainError("point list is empty")
    spec = MissionSpec("list", cam=cam, map_type=map_type, points=points)
    waypoints = []
    for row, (center, agl) in enumerate(points):
        _check_agl(agl)
        z, _ = capture_settings(center, agl, cam)
        waypoints.append(Waypoint(row, 0, center, z.zoom, z.res_x, z.res_y, agl))
    return MissionPlan(spec, tuple(waypoints), len(waypoints), 1)


def cell_count(span: float, step: float, rule: str = "cover") -> int:
    ratio = span / step
    if rule == "cover":
        return max(math.ceil(ratio - 0.5 - 1e-9), 0) + 1
    if rule == "inclusive":
        return math.floor(ratio + 1e-9) + 1
    if rule == "truncate":
        return max(math.floor(ratio + 1e-9), 1)
    if rule == "ceil":
        return max(math.ceil(ratio - 1e-9), 1)
    raise DomainError(f"unknown edge rule {rule!r}")


def raster_spans(bbox: GeoBBox, metric: str = "utm") -> tuple[float, float]:
    """East-west and north-south extent of ``bbox`` in meters."""
    tl, br = bbox.top_left, bbox.bottom_right
    if metric == "utm":
        a = latlon_to_utm(tl)
        b = latlon_to_utm(br, pinned_zone=a.zone, hemisphere=a.hemisphere)
        return b.easting - a.easting, a.northing - b.northing
    if metric == "geodesic":
        span_e = geodesic((tl.lat, tl.lon), (tl.lat, br.lon)).meters
        span_n = geodesic((tl.lat, tl.lon), (br.lat, tl.lon)).meters
        return span_e, span_n
    raise DomainError(f"unknown span metric {metric!r}")


def plan_raster(spec: MissionSpec) -> MissionPlan:
    """Row-major lattice in the top-left corner's UTM zone.

    The first center sits on the top-left corner; columns advance east by
    ``width * (1 - overlap)`` and rows south by ``height * (1 - overlap)``.
    One zoom/resolution, computed at the box center, serves every waypoint.
    """
    if spec.kind != "raster":
        raise DomainError(f"plan_raster needs a raster spec, got {spec.kind!r}")
    bbox = spec.bbox
    fp = footprint_dims(spec.agl, spec.cam)
    step_x = fp.width_m * (1 - spec.overlap)
    step_y = fp.height_m * (1 - spec.overlap)

    origin = latlon_to_utm(bbox.top_left)
    span_e, span_n = raster_spans(bbox, spec.span_metric)
    n_cols = cell_count(span_e, step_x, spec.edge_rule)
    n_rows = cell_count(span_n, step_y, spec.edge_rule)

    z, _ = capture_settings(bbox.center, spec.agl, spec.cam)
    waypoints = []
    for row in range(n_rows):
        northing = origin.northing - row * step_y
        for col in range(n_cols):
            easting = origin.easting + col * step_x
            center = utm_to_latlon(UtmCoord(easting, northing, origin.zone, origin.hemisphere))
            waypoints.append(Waypoint(row, col, center, z.zoom, z.res_x, z.res_y,
                                      spec.agl, easting, northing))
    return MissionPlan(spec, tuple(waypoints), n_rows, n_cols, origin.zone,
                       origin.hemisphere, fp, step_x, step_y)


def plan(spec: MissionSpec) -> MissionPlan:
    if spec.kind == "raster":
        return plan_raster(spec)
    if spec.kind == "single":
        center, agl = spec.points[0]
        return plan_single(center, agl, spec.cam, spec.map_type)
    return plan_list(spec.points, spec.cam, spec.map_type)


# -- coordinate input grammar -------------------------------------------------

def _floats(fields, where):
    try:
        return [float(f) for f in fields]
    except ValueError:
        raise ParseError(f"{where}: expected numbers, got {' '.join(fields)!r}") from None


def read_coords_file(path) -> list[tuple[GeoPoint, float]]:
    """Whitespace-separated ``lat lon agl`` per line; blank lines and ``#``
    comments are skipped."""
    points = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            where = f"{path}:{lineno}"
            if len(fields) != 3:
                raise ParseError(f"{where}: expected 'lat lon agl', got {len(fields)} fields")
            lat, lon, agl = _floats(fields, where)
            try:
                points.append((GeoPoint(lat, lon), agl))
            except DomainError as exc:
                raise ParseError(f"{where}: {exc}") from None
    if not points:
        raise ParseError(f"{path}: no coordinates found")
    return points


def parse_coords(text: str):
    """Classify a coords argument.

    Returns ``("file", [(GeoPoint, agl), ...])``, ``("raster", GeoBBox, agl)``
    or ``("single", GeoPoint, agl)``.
    """
    text = str(text).strip()
    if os.path.isfile(text):
        return ("file", read_coords_file(text))
    fields = text.strip('"\'').split("_")
    hint = f"expected a file, {RASTER_GRAMMAR} or {SINGLE_GRAMMAR}"
    if len(fields) not in (3, 5):
        raise ParseError(f"cannot parse coords {text!r}: {hint}")
    values = _floats(fields, f"coords {text!r}")
    try:
        if len(values) == 5:
            lat_tl, lon_tl, lat_br, lon_br, agl = values
            bbox = GeoBBox(GeoPoint(lat_tl, lon_tl), GeoPoint(lat_br, lon_br))
            return ("raster", bbox, agl)
        lat, lon, agl = values
        return ("single", GeoPoint(lat, lon), agl)
    except DomainError as exc:
        raise ParseError(f"coords {text!r}: {exc}") from None
