"""Metric geodesy: point offsetting in meters and WGS-84 UTM conversion.

UTM uses the Krueger series for the transverse Mercator projection carried to
sixth order in the third flattening, which keeps the series error well under a
millimetre inside a zone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from geopy.distance import geodesic

from .errors import DomainError
from .geomath import MAX_LAT, Footprint, GeoBBox, GeoPoint

WGS84_A = 6378137.0
WGS84_F = 1 / 298.257223563
UTM_K0 = 0.9996
UTM_FALSE_EASTING = 500_000.0
UTM_FALSE_NORTHING_SOUTH = 10_000_000.0
UTM_MAX_LAT = 84.0

_N = WGS84_F / (2 - WGS84_F)
_E = math.sqrt(WGS84_F * (2 - WGS84_F))
_A = WGS84_A / (1 + _N) * (1 + _N**2 / 4 + _N**4 / 64 + _N**6 / 256)


def _series(coeffs):
    n = _N
    return [sum(c * n**p for p, c in row) for row in coeffs]


# alpha_j (forward) and beta_j (inverse), each a polynomial in n up to n^6
_ALPHA = _series([
    [(1, 1 / 2), (2, -2 / 3), (3, 5 / 16), (4, 41 / 180), (5, -127 / 288), (6, 7891 / 37800)],
    [(2, 13 / 48), (3, -3 / 5), (4, 557 / 1440), (5, 281 / 630), (6, -1983433 / 1935360)],
    [(3, 61 / 240), (4, -103 / 140), (5, 15061 / 26880), (6, 167603 / 181440)],
    [(4, 49561 / 161280), (5, -179 / 168), (6, 6601661 / 7257600)],
    [(5, 34729 / 80640), (6, -3418889 / 1995840)],
    [(6, 212378941 / 319334400)],
])
_BETA = _series([
    [(1, 1 / 2), (2, -2 / 3), (3, 37 / 96), (4, -1 / 360), (5, -81 / 512), (6, 96199 / 604800)],
    [(2, 1 / 48), (3, 1 / 15), (4, -437 / 1440), (5, 46 / 105), (6, -1118711 / 3870720)],
    [(3, 17 / 480), (4, -37 / 840), (5, -209 / 4480), (6, 5569 / 90720)],
    [(4, 4397 / 161280), (5, -11 / 504), (6, -830251 / 7257600)],
    [(5, 4583 / 161280), (6, -108847 / 3991680)],
    [(6, 20648693 / 638668800)],
])


@dataclass(frozen=True)
class UtmCoord:
    easting: float
    northing: float
    zone: int
    hemisphere: str  # "north" | "south"

    def __post_init__(self):
        if not 1 <= self.zone <= 60:
            raise DomainError(f"UTM zone {self.zone} outside [1, 60]")
        if self.hemisphere not in ("north", "south"):
            raise DomainError(f"hemisphere must be 'north' or 'south', got {self.hemisphere!r}")


def utm_zone(lon: float) -> int:
    return min(int(math.floor((lon + 180) / 6)) + 1, 60)


def central_meridian(zone: int) -> float:
    return zone * 6 - 183.0


def latlon_to_utm(p: GeoPoint, pinned_zone: int | None = None,
                  hemisphere: str | None = None) -> UtmCoord:
    """Project ``p`` to UTM. ``pinned_zone``/``hemisphere`` force the grid
    so that a whole mission shares one planar frame."""
    if abs(p.lat) >= UTM_MAX_LAT:
        raise DomainError(f"latitude {p.lat} outside the UTM band (|lat| < {UTM_MAX_LAT})")
    zone = pinned_zone if pinned_zone is not None else utm_zone(p.lon)
    hemi = hemisphere or ("north" if p.lat >= 0 else "south")

    phi = math.radians(p.lat)
    lam = math.radians(p.lon - central_meridian(zone))
    lam = math.atan2(math.sin(lam), math.cos(lam))

    # conformal latitude, via its tangent
    tau = math.tan(phi)
    sigma = math.sinh(_E * math.atanh(_E * tau / math.hypot(1, tau)))
    tau_c = tau * math.hypot(1, sigma) - sigma * math.hypot(1, tau)

    xi_p = math.atan2(tau_c, math.cos(lam))
    eta_p = math.asinh(math.sin(lam) / math.hypot(tau_c, math.cos(lam)))
    xi, eta = xi_p, eta_p
    for j, a in enumerate(_ALPHA, start=1):
        xi += a * math.sin(2 * j * xi_p) * math.cosh(2 * j * eta_p)
        eta += a * math.cos(2 * j * xi_p) * math.sinh(2 * j * eta_p)

    easting = UTM_FALSE_EASTING + UTM_K0 * _A * eta
    northing = UTM_K0 * _A * xi
    if hemi == "south":
        northing += UTM_FALSE_NORTHING_SOUTH
    return UtmCoord(easting, northing, zone, hemi)


def utm_to_latlon(u: UtmCoord) -> GeoPoint:
    northing = u.northing - (UTM_FALSE_NORTHING_SOUTH if u.hemisphere == "south" else 0.0)
    xi = northing / (UTM_K0 * _A)
    eta = (u.easting - UTM_FALSE_EASTING) / (UTM_K0 * _A)
    xi_p, eta_p = xi, eta
    for j, b in enumerate(_BETA, start=1):
        xi_p -= b * math.sin(2 * j * xi) * math.cosh(2 * j * eta)
        eta_p -= b * math.cos(2 * j * xi) * math.sinh(2 * j * eta)

    tau_c = math.sin(xi_p) / math.hypot(math.sinh(eta_p), math.cos(xi_p))
    lam = math.atan2(math.sinh(eta_p), math.cos(xi_p))

    # Newton iteration for tan(lat) given the conformal tangent
    e2 = _E * _E
    tau = tau_c
    for _ in range(8):
        sigma = math.sinh(_E * math.atanh(_E * tau / math.hypot(1, tau)))
        tau_i = tau * math.hypot(1, sigma) - sigma * math.hypot(1, tau)
        step = ((tau_c - tau_i) / math.hypot(1, tau_i)
                * (1 + (1 - e2) * tau * tau) / ((1 - e2) * math.hypot(1, tau)))
        tau += step
        if abs(step) < 1e-15:
            break

    lat = math.degrees(math.atan(tau))
    lon = central_meridian(u.zone) + math.degrees(lam)
    lon = (lon + 180.0) % 360.0 - 180.0
    return GeoPoint(lat, lon)


def offset_point(origin: GeoPoint, d_east: float, d_north: float) -> GeoPoint:
    """Walk ``d_east`` meters along the east-bearing geodesic, then ``d_north``
    meters along the meridian (negative values go west / south)."""
    if not (math.isfinite(d_east) and math.isfinite(d_north)):
        raise DomainError(f"non-finite offset ({d_east}, {d_north})")
    lat, lon = origin.lat, origin.lon
    for distance, bearing in ((d_east, 90.0), (d_north, 0.0)):
        if distance == 0:
            continue
        if distance < 0:
            distance, bearing = -distance, bearing + 180.0
        dest = geodesic(meters=distance).destination((lat, lon), bearing)
        lat, lon = dest.latitude, dest.longitude
    if abs(lat) > MAX_LAT:
        raise DomainError(
            f"offset ({d_east} m E, {d_north} m N) from ({origin.lat}, {origin.lon}) "
            f"reaches latitude {lat:.6f}, beyond the Mercator limit"
        )
    return GeoPoint(lat, (lon + 180.0) % 360.0 - 180.0)


def bbox_from_meters(center: GeoPoint, fp: Footprint) -> GeoBBox:
    tl = offset_point(center, -fp.width_m / 2, fp.height_m / 2)
    br = offset_point(center, fp.width_m / 2, -fp.height_m / 2)
    return GeoBBox(tl, br)
