"""Training losses over predicted box extents.

Three terms, combined with fixed weights:

* booked-location loss (km): pulls the box to contain the booked point.
  ``hinge`` mode is zero once the point is inside; ``absolute`` mode sums the
  plain per-axis distances from every bound coordinate to the point, which
  drives each bound to the median of the data and collapses the box.  The
  absolute form is kept behind a flag to document that failure mode.
* bounds-size loss (km): width + height, the pressure against covering the
  whole map.  Signed, so gradients flow even through inverted boxes.
* invalid-bounds loss (degrees): positive only when a southwest coordinate
  exceeds its northeast counterpart.

Longitude km conversion inside the batched loss uses the search-center
latitude of each example, held constant under differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from ..geo import KM_PER_DEG_LAT, BoundingBox, ExtentOffsets, GeoPoint

BlMode = Literal["hinge", "absolute"]


@dataclass(frozen=True)
class LossWeights:
    """Relative weights of the three loss terms."""

    alpha: float = 250.0  # booked-location term
    beta: float = 1.0  # bounds-size term
    gamma: float = 1_000_000.0  # invalid-bounds term

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("loss weights must be nonnegative")

    def to_json_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma}

    @classmethod
    def from_json_dict(cls, d: dict) -> "LossWeights":
        return cls(alpha=float(d["alpha"]), beta=float(d["beta"]), gamma=float(d["gamma"]))


def bl_loss(box: BoundingBox, booked: GeoPoint, mode: BlMode = "hinge") -> float:
    """Booked-location loss of one box against one point, in km."""
    cos_ref = np.cos(np.radians(box.center.lat))
    k_lat = KM_PER_DEG_LAT
    k_lng = KM_PER_DEG_LAT * cos_ref
    if mode == "hinge":
        lat_term = max(0.0, box.sw.lat - booked.lat) + max(0.0, booked.lat - box.ne.lat)
        lng_term = max(0.0, box.sw.lng - booked.lng) + max(0.0, booked.lng - box.ne.lng)
    elif mode == "absolute":
        lat_term = abs(box.sw.lat - booked.lat) + abs(box.ne.lat - booked.lat)
        lng_term = abs(box.sw.lng - booked.lng) + abs(box.ne.lng - booked.lng)
    else:
        raise ValueError(f"unknown booked-location loss mode: {mode!r}")
    return float(k_lat * lat_term + k_lng * lng_term)


def rbs_loss(box: BoundingBox) -> float:
    """Signed width+height in km (negative if the box is inverted)."""
    cos_ref = np.cos(np.radians(box.center.lat))
    width = (box.ne.lng - box.sw.lng) * KM_PER_DEG_LAT * cos_ref
    height = (box.ne.lat - box.sw.lat) * KM_PER_DEG_LAT
    return float(width + height)


def vb_loss(raw_sw: GeoPoint, raw_ne: GeoPoint) -> float:
    """Degrees by which the southwest corner overshoots the northeast one."""
    return float(max(raw_sw.lat - raw_ne.lat, 0.0) + max(raw_sw.lng - raw_ne.lng, 0.0))


def total_loss(
    center: GeoPoint,
    booked: GeoPoint,
    offsets: ExtentOffsets,
    weights: LossWeights = LossWeights(),
    mode: BlMode = "hinge",
) -> float:
    """Weighted loss of one predicted extent vector for one example."""
    loss, _ = batch_offsets_loss(
        np.asarray(offsets, dtype=np.float64)[None, :],
        np.array([[center.lat, center.lng]]),
        np.array([[booked.lat, booked.lng]]),
        weights=weights,
        mode=mode,
    )
    return float(loss)


def batch_offsets_loss(
    offsets: np.ndarray,
    centers: np.ndarray,
    labels: np.ndarray,
    weights: LossWeights = LossWeights(),
    mode: BlMode = "hinge",
) -> tuple[float, np.ndarray]:
    """Mean weighted loss over a batch and its gradient wrt the offsets.

    ``offsets`` is (B, 4) ordered (sw_lat, ne_lat, sw_lng, ne_lng); centers
    and labels are (B, 2) ordered (lat, lng).  Subgradients at hinge kinks
    are taken as zero.  Returns (scalar loss, (B, 4) gradient including the
    1/B mean factor).
    """
    if offsets.ndim != 2 or offsets.shape[1] != 4:
        raise ValueError(f"offsets must be (B, 4), got {offsets.shape}")
    n = offsets.shape[0]
    c_lat, c_lng = centers[:, 0], centers[:, 1]
    b_lat, b_lng = labels[:, 0], labels[:, 1]
    cos_ref = np.cos(np.radians(c_lat))
    k_lat = KM_PER_DEG_LAT
    k_lng = KM_PER_DEG_LAT * cos_ref

    sw_lat = c_lat - offsets[:, 0]
    ne_lat = c_lat + offsets[:, 1]
    sw_lng = c_lng - offsets[:, 2]
    ne_lng = c_lng + offsets[:, 3]

    grad = np.zeros_like(offsets)

    if mode == "hinge":
        t_sw_lat = np.maximum(sw_lat - b_lat, 0.0)
        t_ne_lat = np.maximum(b_lat - ne_lat, 0.0)
        t_sw_lng = np.maximum(sw_lng - b_lng, 0.0)
        t_ne_lng = np.maximum(b_lng - ne_lng, 0.0)
        bl = k_lat * (t_sw_lat + t_ne_lat) + k_lng * (t_sw_lng + t_ne_lng)
        dbl = np.stack(
            [
                -k_lat * (t_sw_lat > 0.0),
                -k_lat * (t_ne_lat > 0.0),
                -k_lng * (t_sw_lng > 0.0),
                -k_lng * (t_ne_lng > 0.0),
            ],
            axis=1,
        )
    elif mode == "absolute":
        bl = k_lat * (np.abs(sw_lat - b_lat) + np.abs(ne_lat - b_lat)) + k_lng * (
            np.abs(sw_lng - b_lng) + np.abs(ne_lng - b_lng)
        )
        dbl = np.stack(
            [
                -k_lat * np.sign(sw_lat - b_lat),
                k_lat * np.sign(ne_lat - b_lat),
                -k_lng * np.sign(sw_lng - b_lng),
                k_lng * np.sign(ne_lng - b_lng),
            ],
            axis=1,
        )
    else:
        raise ValueError(f"unknown booked-location loss mode: {mode!r}")

    lat_span = offsets[:, 0] + offsets[:, 1]
    lng_span = offsets[:, 2] + offsets[:, 3]
    rbs = k_lat * lat_span + k_lng * lng_span
    drbs = np.stack([np.full(n, k_lat), np.full(n, k_lat), k_lng, k_lng], axis=1)

    vb = np.maximum(-lat_span, 0.0) + np.maximum(-lng_span, 0.0)
    lat_inverted = lat_span < 0.0
    lng_inverted = lng_span < 0.0
    dvb = np.stack(
        [
            -1.0 * lat_inverted,
            -1.0 * lat_inverted,
            -1.0 * lng_inverted,
            -1.0 * lng_inverted,
        ],
        axis=1,
    )

    per_example = weights.alpha * bl + weights.beta * rbs + weights.gamma * vb
    grad = (weights.alpha * dbl + weights.beta * drbs + weights.gamma * dvb) / n
    return float(per_example.mean()), grad
