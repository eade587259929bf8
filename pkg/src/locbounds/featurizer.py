"""Search-request featurization: vocabularies, normalization, encoding.

A request contributes 10 categorical slots (dense indices into per-feature
vocabularies, index 0 reserved for out-of-vocabulary values) and 9 continuous
slots (standardized floats).  Trip dates enter as sin/cos of day-of-year so
seasonality is learnable; the checkout date is carried implicitly by trip
length, which keeps the continuous block at 9 without collinear slots.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .geo import BoundingBox, GeoPoint, validate_point

LOCATION_TYPES = (
    "country",
    "state",
    "city",
    "neighborhood",
    "street",
    "address",
    "poi",
    "building",
)

# Location types whose administrative bounds are served verbatim, expanded by
# a fixed radius, or scaled by the log expansion factor (see policy module).
ADMIN_VERBATIM_TYPES = ("country", "state", "neighborhood")
RADIUS_TYPES = ("city",)
SCALED_ADMIN_TYPES = ("street", "address", "poi", "building")

SURFACE_CELL_DEG = 0.5  # fixed lat/lng grid for the surface-cell feature

DAYS_IN_YEAR = 366


def surface_cell_id(p: GeoPoint, cell_deg: float = SURFACE_CELL_DEG) -> str:
    """Identifier of the fixed grid cell containing a point."""
    return f"c{math.floor(p.lat / cell_deg)}_{math.floor(p.lng / cell_deg)}"


@dataclass(frozen=True)
class SearchRequest:
    """One destination search with its trip parameters.

    ``search_day_index`` is the simulation day the search was issued on and
    exists only for attribution; it never becomes a model feature.
    """

    location_id: str
    metro_id: str
    surface_cell_id: str
    location_type: str
    country_code: str
    guests: int
    is_mobile_app: bool
    device_type: str
    lead_days: int
    trip_length_nights: int
    is_weekend_trip: bool
    checkin_day_of_year: int
    checkout_day_of_year: int
    search_day_of_year: int
    center: GeoPoint
    admin_bounds: BoundingBox | None = None
    search_day_index: int = 0

    def __post_init__(self) -> None:
        if self.location_type not in LOCATION_TYPES:
            raise ValueError(f"unknown location_type: {self.location_type!r}")
        if self.guests < 1:
            raise ValueError("guests must be >= 1")
        if self.trip_length_nights < 1:
            raise ValueError("trip_length_nights must be >= 1")
        if self.lead_days < 0:
            raise ValueError("lead_days must be >= 0")
        if self.checkout_day_of_year <= self.checkin_day_of_year:
            raise ValueError("checkout must fall strictly after checkin")
        for day in (self.checkin_day_of_year, self.checkout_day_of_year, self.search_day_of_year):
            if not 1 <= day <= DAYS_IN_YEAR:
                raise ValueError(f"day-of-year out of range: {day}")
        validate_point(self.center)

    def to_json_dict(self) -> dict:
        d = {
            "location_id": self.location_id,
            "metro_id": self.metro_id,
            "surface_cell_id": self.surface_cell_id,
            "location_type": self.location_type,
            "country_code": self.country_code,
            "guests": self.guests,
            "is_mobile_app": self.is_mobile_app,
            "device_type": self.device_type,
            "lead_days": self.lead_days,
            "trip_length_nights": self.trip_length_nights,
            "is_weekend_trip": self.is_weekend_trip,
            "checkin_day_of_year": self.checkin_day_of_year,
            "checkout_day_of_year": self.checkout_day_of_year,
            "search_day_of_year": self.search_day_of_year,
            "center": {"lat": self.center.lat, "lng": self.center.lng},
            "search_day_index": self.search_day_index,
        }
        if self.admin_bounds is not None:
            d["admin_bounds"] = {
                "sw": {"lat": self.admin_bounds.sw.lat, "lng": self.admin_bounds.sw.lng},
                "ne": {"lat": self.admin_bounds.ne.lat, "lng": self.admin_bounds.ne.lng},
            }
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "SearchRequest":
        admin = d.get("admin_bounds")
        return cls(
            location_id=d["location_id"],
            metro_id=d["metro_id"],
            surface_cell_id=d["surface_cell_id"],
            location_type=d["location_type"],
            country_code=d["country_code"],
            guests=int(d["guests"]),
            is_mobile_app=bool(d["is_mobile_app"]),
            device_type=d["device_type"],
            lead_days=int(d["lead_days"]),
            trip_length_nights=int(d["trip_length_nights"]),
            is_weekend_trip=bool(d["is_weekend_trip"]),
            checkin_day_of_year=int(d["checkin_day_of_year"]),
            checkout_day_of_year=int(d["checkout_day_of_year"]),
            search_day_of_year=int(d["search_day_of_year"]),
            center=GeoPoint(float(d["center"]["lat"]), float(d["center"]["lng"])),
            admin_bounds=(
                BoundingBox(
                    GeoPoint(float(admin["sw"]["lat"]), float(admin["sw"]["lng"])),
                    GeoPoint(float(admin["ne"]["lat"]), float(admin["ne"]["lng"])),
                )
                if admin
                else None
            ),
            search_day_index=int(d.get("search_day_index", 0)),
        )

    def canonical_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))


def _granularity(req: SearchRequest) -> str:
    if req.location_type in ("country", "state"):
        return "region"
    if req.location_type in ("city", "neighborhood"):
        return "locality"
    return "pinpoint"


def _bounds_rule(req: SearchRequest) -> str:
    if req.location_type in ADMIN_VERBATIM_TYPES:
        return "admin_verbatim"
    if req.location_type in RADIUS_TYPES:
        return "radius"
    return "scaled_admin"


# Ten categorical slots: the seven slots taken directly from the request plus
# three subfields derived from the location type (its granularity class, the
# bounds-construction rule it maps to, and whether it names a precise place).
CATEGORICAL_FEATURES: tuple[tuple[str, Callable[[SearchRequest], str]], ...] = (
    ("location_id", lambda r: r.location_id),
    ("metro_id", lambda r: r.metro_id),
    ("surface_cell_id", lambda r: r.surface_cell_id),
    ("location_type", lambda r: r.location_type),
    ("country_code", lambda r: r.country_code),
    ("is_mobile_app", lambda r: "mobile" if r.is_mobile_app else "not_mobile"),
    ("device_type", lambda r: r.device_type),
    ("location_granularity", _granularity),
    ("bounds_rule", _bounds_rule),
    ("is_precise_place", lambda r: "precise" if r.location_type in ("address", "poi", "building") else "broad"),
)

CATEGORICAL_FEATURE_NAMES = tuple(name for name, _ in CATEGORICAL_FEATURES)

CONTINUOUS_FEATURE_NAMES = (
    "guests",
    "is_mobile_app",
    "lead_days",
    "trip_length_nights",
    "is_weekend_trip",
    "checkin_sin",
    "checkin_cos",
    "search_sin",
    "search_cos",
)

N_CATEGORICAL = len(CATEGORICAL_FEATURE_NAMES)
N_CONTINUOUS = len(CONTINUOUS_FEATURE_NAMES)

OOV_INDEX = 0


def raw_continuous(req: SearchRequest) -> np.ndarray:
    """Continuous slots before standardization (booleans as 0/1, cyclic dates)."""
    checkin_angle = 2.0 * math.pi * req.checkin_day_of_year / DAYS_IN_YEAR
    search_angle = 2.0 * math.pi * req.search_day_of_year / DAYS_IN_YEAR
    return np.array(
        [
            float(req.guests),
            1.0 if req.is_mobile_app else 0.0,
            float(req.lead_days),
            float(req.trip_length_nights),
            1.0 if req.is_weekend_trip else 0.0,
            math.sin(checkin_angle),
            math.cos(checkin_angle),
            math.sin(search_angle),
            math.cos(search_angle),
        ],
        dtype=np.float64,
    )


@dataclass
class Vocabulary:
    """Per-feature mapping from raw categorical values to dense indices.

    Indices start at 1; index 0 is the out-of-vocabulary slot, so encoding an
    unseen value is always possible.  Built in first-seen order over a corpus,
    which makes construction deterministic.
    """

    tables: dict[str, dict[str, int]] = field(default_factory=dict)

    def size(self, feature: str) -> int:
        return len(self.tables[feature]) + 1  # +1 for the OOV slot

    def sizes(self) -> dict[str, int]:
        return {name: self.size(name) for name in CATEGORICAL_FEATURE_NAMES}

    def index(self, feature: str, raw: str) -> int:
        return self.tables[feature].get(raw, OOV_INDEX)

    def fingerprint(self) -> str:
        payload = json.dumps(self.tables, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def to_json_dict(self) -> dict:
        return {"tables": self.tables}

    @classmethod
    def from_json_dict(cls, d: dict) -> "Vocabulary":
        return cls(tables={f: dict(t) for f, t in d["tables"].items()})


def build_vocab(corpus: Sequence[SearchRequest]) -> Vocabulary:
    """First-seen-order vocabulary over every categorical slot of a corpus."""
    if not corpus:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    tables: dict[str, dict[str, int]] = {name: {} for name in CATEGORICAL_FEATURE_NAMES}
    for req in corpus:
        for name, extract in CATEGORICAL_FEATURES:
            raw = extract(req)
            table = tables[name]
            if raw not in table:
                table[raw] = len(table) + 1
    return Vocabulary(tables=tables)


@dataclass
class FeatureStats:
    """Mean/std of the continuous slots over a training corpus."""

    mean: np.ndarray
    std: np.ndarray

    STD_FLOOR = 1e-6

    def to_json_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_json_dict(cls, d: dict) -> "FeatureStats":
        return cls(
            mean=np.asarray(d["mean"], dtype=np.float64),
            std=np.asarray(d["std"], dtype=np.float64),
        )


def compute_stats(corpus: Sequence[SearchRequest]) -> FeatureStats:
    if not corpus:
        raise ValueError("cannot compute feature statistics from an empty corpus")
    raw = np.stack([raw_continuous(req) for req in corpus])
    std = raw.std(axis=0)
    return FeatureStats(mean=raw.mean(axis=0), std=np.maximum(std, FeatureStats.STD_FLOOR))


@dataclass(frozen=True)
class FeatureVector:
    """Encoded model input: dense categorical indices + standardized floats."""

    categorical: np.ndarray  # shape (N_CATEGORICAL,), int64
    continuous: np.ndarray  # shape (N_CONTINUOUS,), float64

    def canonical_bytes(self) -> bytes:
        """Stable byte encoding, used to key deterministic dropout masks."""
        head = struct.pack(f"<{N_CATEGORICAL}q", *(int(i) for i in self.categorical))
        return head + self.continuous.astype("<f8").tobytes()


def encode(req: SearchRequest, vocab: Vocabulary, stats: FeatureStats) -> FeatureVector:
    """Encode one request. Total: unseen categorical values map to index 0."""
    cat = np.array(
        [vocab.index(name, extract(req)) for name, extract in CATEGORICAL_FEATURES],
        dtype=np.int64,
    )
    cont = (raw_continuous(req) - stats.mean) / stats.std
    return FeatureVector(categorical=cat, continuous=cont)


def encode_many(
    corpus: Iterable[SearchRequest], vocab: Vocabulary, stats: FeatureStats
) -> tuple[np.ndarray, np.ndarray]:
    """Encode a corpus to stacked (categorical, continuous) arrays."""
    cats = []
    conts = []
    for req in corpus:
        fv = encode(req, vocab, stats)
        cats.append(fv.categorical)
        conts.append(fv.continuous)
    return np.stack(cats), np.stack(conts)
