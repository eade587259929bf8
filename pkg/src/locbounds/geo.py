"""Geographic primitives: points, boxes, degree/km conversion, box algebra.

Everything here is a pure function on immutable values. Distances are
axis-separable (per-coordinate degree differences scaled to kilometers on a
spherical Earth), which keeps them usable inside differentiable losses.
Boxes never wrap the antimeridian; coordinates are clamped, not rejected.
"""

from __future__ import annotations

import math
from typing import Literal, NamedTuple

EARTH_RADIUS_KM = 6371.0088  # IUGG mean Earth radius
KM_PER_DEG_LAT = math.radians(1.0) * EARTH_RADIUS_KM  # ~111.19508 km per degree

MILES_TO_KM = 1.609344

# Expansion-factor defaults for point-like places (see expansion_factor).
EXPANSION_ALPHA = 2.9
EXPANSION_BETA = -0.5


class GeoPoint(NamedTuple):
    """A latitude/longitude pair in decimal degrees."""

    lat: float
    lng: float


class BoundingBox(NamedTuple):
    """Axis-aligned box given by southwest and northeast corners.

    Valid boxes satisfy ``sw.lat <= ne.lat`` and ``sw.lng <= ne.lng``;
    antimeridian-wrapping boxes are out of scope.
    """

    sw: GeoPoint
    ne: GeoPoint

    @property
    def center(self) -> GeoPoint:
        return GeoPoint((self.sw.lat + self.ne.lat) / 2.0, (self.sw.lng + self.ne.lng) / 2.0)

    def is_valid(self) -> bool:
        return (
            -90.0 <= self.sw.lat <= self.ne.lat <= 90.0
            and -180.0 <= self.sw.lng <= self.ne.lng <= 180.0
        )


class ExtentOffsets(NamedTuple):
    """Outward extents in degrees from a search center, one per box edge.

    ``sw_*`` components are subtracted from the center, ``ne_*`` components
    added, so a vector with all components >= 0 always yields a valid box.
    Raw model outputs may be negative; validity of those is handled by the
    invalid-bounds loss, not here.
    """

    sw_lat: float
    ne_lat: float
    sw_lng: float
    ne_lng: float


class BoxSize(NamedTuple):
    """Box dimensions in kilometers."""

    width_km: float
    height_km: float
    wh_sum_km: float
    area_km2: float
    diagonal_km: float


def clamp_lat(lat: float) -> float:
    return min(90.0, max(-90.0, lat))


def clamp_lng(lng: float) -> float:
    return min(180.0, max(-180.0, lng))


def validate_point(p: GeoPoint) -> None:
    """Raise ValueError if a point lies outside valid lat/lng ranges."""
    if not (-90.0 <= p.lat <= 90.0):
        raise ValueError(f"latitude out of range: {p.lat}")
    if not (-180.0 <= p.lng <= 180.0):
        raise ValueError(f"longitude out of range: {p.lng}")


def to_box(center: GeoPoint, offsets: ExtentOffsets) -> BoundingBox:
    """Build the box spanned by outward extents around a center, clamped.

    Clamping makes this total: any finite offsets yield a box with
    coordinates inside the valid ranges.  Negative offsets are applied as
    given and may produce an inverted box prior to clamping; callers that
    need validity should keep offsets nonnegative.
    """
    sw = GeoPoint(clamp_lat(center.lat - offsets.sw_lat), clamp_lng(center.lng - offsets.sw_lng))
    ne = GeoPoint(clamp_lat(center.lat + offsets.ne_lat), clamp_lng(center.lng + offsets.ne_lng))
    return BoundingBox(sw, ne)


def offsets_from_box(center: GeoPoint, box: BoundingBox) -> ExtentOffsets:
    """Recover the outward extents of ``box`` relative to ``center``.

    Inverse of :func:`to_box` whenever no clamping occurred.
    """
    return ExtentOffsets(
        sw_lat=center.lat - box.sw.lat,
        ne_lat=box.ne.lat - center.lat,
        sw_lng=center.lng - box.sw.lng,
        ne_lng=box.ne.lng - center.lng,
    )


def contains(box: BoundingBox, p: GeoPoint) -> bool:
    """Closed-interval containment test (boundary points are inside)."""
    return box.sw.lat <= p.lat <= box.ne.lat and box.sw.lng <= p.lng <= box.ne.lng


Axis = Literal["lat", "lng"]


def axis_km(a_deg: float, b_deg: float, axis: Axis, ref_lat: float = 0.0) -> float:
    """Kilometers between two coordinates along one axis.

    Latitude degrees convert at a fixed rate; longitude degrees shrink with
    cos(ref_lat).  ``ref_lat`` should be the latitude of the box or search
    center the coordinates belong to.
    """
    d = abs(a_deg - b_deg)
    if axis == "lat":
        return d * KM_PER_DEG_LAT
    if axis == "lng":
        return d * KM_PER_DEG_LAT * math.cos(math.radians(ref_lat))
    raise ValueError(f"unknown axis: {axis!r}")


def box_size_km(box: BoundingBox) -> BoxSize:
    """Width/height/perimeter-style measures of a box in kilometers.

    Longitude spans are converted at the latitude of the box center, the
    single convention used across losses and metrics.
    """
    ref_lat = box.center.lat
    width = axis_km(box.ne.lng, box.sw.lng, "lng", ref_lat=ref_lat)
    height = axis_km(box.ne.lat, box.sw.lat, "lat")
    return BoxSize(
        width_km=width,
        height_km=height,
        wh_sum_km=width + height,
        area_km2=width * height,
        diagonal_km=math.hypot(width, height),
    )


def expansion_factor(d_km: float, alpha: float = EXPANSION_ALPHA, beta: float = EXPANSION_BETA) -> float:
    """Log-scale growth factor for point-like places, by diagonal size.

    ``max(1.0, alpha + beta * ln(d + 1))``: small places get expanded close
    to ``alpha``x, and the factor decays to 1.0 as the place's own diagonal
    grows (with the defaults, at d >= e^3.8 - 1 ~ 43.7 km).
    """
    if d_km < 0:
        raise ValueError(f"diagonal must be nonnegative, got {d_km}")
    return max(1.0, alpha + beta * math.log(d_km + 1.0))


def scale_box(box: BoundingBox, factor: float) -> BoundingBox:
    """Scale a box about its center by a nonnegative factor, then clamp."""
    if factor < 0:
        raise ValueError(f"scale factor must be nonnegative, got {factor}")
    c = box.center
    half_lat = (box.ne.lat - box.sw.lat) / 2.0 * factor
    half_lng = (box.ne.lng - box.sw.lng) / 2.0 * factor
    return BoundingBox(
        GeoPoint(clamp_lat(c.lat - half_lat), clamp_lng(c.lng - half_lng)),
        GeoPoint(clamp_lat(c.lat + half_lat), clamp_lng(c.lng + half_lng)),
    )


def point_distance_km(a: GeoPoint, b: GeoPoint, ref_lat: float | None = None) -> float:
    """Planar distance from per-axis km components (equirectangular).

    Uses the same axis conversion as the losses and metrics so that "nearest"
    means the same thing everywhere.  ``ref_lat`` defaults to the midpoint
    latitude.
    """
    if ref_lat is None:
        ref_lat = (a.lat + b.lat) / 2.0
    dy = axis_km(a.lat, b.lat, "lat")
    dx = axis_km(a.lng, b.lng, "lng", ref_lat=ref_lat)
    return math.hypot(dx, dy)
