"""Synthetic booking world: destinations, latent booking mixtures, listings.

Destinations carry a per-guest-count mixture of gaussian components that
generates intended stay locations.  Satellite components sit away from the
center and gain weight for large groups, so big-group searches genuinely book
in different places.  Administrative bounds are drawn smaller than the
booking dispersion for most location types: the premise that makes anything
beyond verbatim admin bounds worth doing.  Popularity follows a Zipf law so
head destinations see abundant bookings while tail ones stay cold.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..featurizer import surface_cell_id
from ..geo import BoundingBox, GeoPoint, clamp_lat, clamp_lng
from ..seeding import rng_for
from .index import GridIndex

# Half-extents (degrees) of administrative bounds and the base dispersion of
# booking intents, by location type.  Dispersion deliberately exceeds the
# admin box for everything except regions, so bookings spill outside.
ADMIN_HALF_DEG = {
    "country": 2.2,
    "state": 1.1,
    "city": 0.32,
    "neighborhood": 0.05,
    "street": 0.018,
    "address": 0.008,
    "poi": 0.012,
    "building": 0.004,
}
INTENT_SIGMA_DEG = {
    "country": 0.85,
    "state": 0.50,
    "city": 0.16,
    "neighborhood": 0.11,
    "street": 0.09,
    "address": 0.09,
    "poi": 0.10,
    "building": 0.08,
}

MAIN_CAPACITY_DIST = ((2, 0.42), (3, 0.16), (4, 0.20), (5, 0.08), (6, 0.08), (8, 0.04), (10, 0.015), (12, 0.005))
SATELLITE_CAPACITY_DIST = ((4, 0.15), (6, 0.22), (8, 0.25), (10, 0.18), (12, 0.12), (16, 0.08))


@dataclass(frozen=True)
class Listing:
    listing_id: int
    location: GeoPoint
    capacity: int
    nightly_price: float

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")


@dataclass(frozen=True)
class MixtureComponent:
    """One gaussian of a destination's intent mixture.

    ``weight_small`` applies below the large-group threshold, ``weight_large``
    at or above it; each vector of weights sums to 1 across a destination's
    components.
    """

    mean: GeoPoint
    std_lat: float
    std_lng: float
    weight_small: float
    weight_large: float


@dataclass(frozen=True)
class Destination:
    location_id: str
    location_type: str
    center: GeoPoint
    admin_bounds: BoundingBox
    components: tuple[MixtureComponent, ...]
    popularity: float
    metro_id: str
    country_code: str

    def weights(self, large_group: bool) -> np.ndarray:
        if large_group:
            return np.array([c.weight_large for c in self.components])
        return np.array([c.weight_small for c in self.components])


@dataclass
class WorldConfig:
    """Knobs of the generative world; everything JSON-serializable."""

    n_destinations: int = 50
    n_listings: int = 10_000
    zipf_s: float = 1.1
    lat_min: float = 30.0
    lat_max: float = 46.0
    lng_min: float = -25.0
    lng_max: float = -1.0
    grid_cell_deg: float = 0.1
    cancel_rate: float = 0.05
    maturation_days: int = 7
    intent_radius_km: float = 12.0
    large_group_min: int = 8
    base_search_day_of_year: int = 60
    metro_cell_deg: float = 4.0
    n_countries: int = 4
    satellite_prob: float = 0.65
    forced_satellite_top_k: int = 8
    listing_share_smoothing: float = 0.5
    min_listings_per_destination: int = 25
    guest_weights: list = field(
        default_factory=lambda: [
            [1, 0.18], [2, 0.34], [3, 0.12], [4, 0.14], [5, 0.06],
            [6, 0.05], [8, 0.04], [10, 0.03], [12, 0.025], [14, 0.015],
        ]
    )
    type_weights: dict = field(
        default_factory=lambda: {
            "city": 0.20, "neighborhood": 0.33, "address": 0.15, "poi": 0.12,
            "street": 0.07, "state": 0.06, "building": 0.04, "country": 0.03,
        }
    )
    device_weights: dict = field(
        default_factory=lambda: {"ios": 0.35, "android": 0.25, "desktop_web": 0.3, "mobile_web": 0.1}
    )

    def validate(self) -> None:
        if self.n_destinations < 1 or self.n_listings < 1:
            raise ValueError("need at least one destination and one listing")
        if not (self.lat_min < self.lat_max and self.lng_min < self.lng_max):
            raise ValueError("region extents are inverted")
        if not 0.0 <= self.cancel_rate < 1.0:
            raise ValueError("cancel_rate must be in [0, 1)")
        if abs(sum(w for _, w in self.guest_weights) - 1.0) > 1e-9:
            raise ValueError("guest weights must sum to 1")
        if abs(sum(self.type_weights.values()) - 1.0) > 1e-9:
            raise ValueError("type weights must sum to 1")

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, d: dict) -> "WorldConfig":
        return cls(**d)


@dataclass
class World:
    config: WorldConfig
    seed: int
    destinations: list[Destination]
    listings: list[Listing]
    index: GridIndex = field(repr=False)

    def __post_init__(self) -> None:
        self.destination_by_id = {d.location_id: d for d in self.destinations}
        self.popularity = np.array([d.popularity for d in self.destinations])

    @property
    def listing_lats(self) -> np.ndarray:
        return self.index.lats

    @property
    def listing_lngs(self) -> np.ndarray:
        return self.index.lngs


def _zipf_popularity(n: int, s: float, rng: np.random.Generator) -> np.ndarray:
    """Zipf masses over ranks, assigned to destinations in a random order."""
    ranks = rng.permutation(n) + 1
    mass = ranks.astype(np.float64) ** (-s)
    return mass / mass.sum()


def _largest_remainder_alloc(total: int, shares: np.ndarray, floor_each: int) -> np.ndarray:
    raw = shares / shares.sum() * total
    counts = np.floor(raw).astype(int)
    remainder = total - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:remainder]] += 1
    counts = np.maximum(counts, floor_each)
    # Take back the floor surplus from the largest allocations.
    while counts.sum() > total:
        counts[int(np.argmax(counts))] -= 1
    return counts


def _draw_capacity(rng: np.random.Generator, dist) -> int:
    values = [v for v, _ in dist]
    probs = np.array([p for _, p in dist])
    return int(rng.choice(values, p=probs / probs.sum()))


def generate_world(config: WorldConfig, seed: int) -> World:
    """Deterministically build destinations, listings, and the grid index."""
    config.validate()
    rng = rng_for(seed, "world-gen")
    n = config.n_destinations
    popularity = _zipf_popularity(n, config.zipf_s, rng)
    pop_rank = np.argsort(-popularity, kind="stable")
    rank_of = np.empty(n, dtype=int)
    rank_of[pop_rank] = np.arange(n)

    type_names = sorted(config.type_weights)
    type_probs = np.array([config.type_weights[t] for t in type_names])
    lng_band = (config.lng_max - config.lng_min) / config.n_countries

    destinations: list[Destination] = []
    for i in range(n):
        loc_type = str(rng.choice(type_names, p=type_probs))
        lat = float(rng.uniform(config.lat_min + 1.0, config.lat_max - 1.0))
        lng = float(rng.uniform(config.lng_min + 1.0, config.lng_max - 1.0))
        center = GeoPoint(lat, lng)

        half = ADMIN_HALF_DEG[loc_type] * float(rng.uniform(0.7, 1.4))
        aspect = float(rng.uniform(0.8, 1.25))
        admin = BoundingBox(
            GeoPoint(clamp_lat(lat - half), clamp_lng(lng - half * aspect)),
            GeoPoint(clamp_lat(lat + half), clamp_lng(lng + half * aspect)),
        )

        sigma = INTENT_SIGMA_DEG[loc_type] * float(rng.uniform(0.7, 1.4))
        main_mean = GeoPoint(
            lat + float(rng.normal(0.0, 0.2 * sigma)), lng + float(rng.normal(0.0, 0.2 * sigma))
        )
        has_satellite = rank_of[i] < config.forced_satellite_top_k or rng.random() < config.satellite_prob
        comps: list[MixtureComponent] = []
        if has_satellite:
            n_sat = int(rng.integers(1, 3))
            sat_small = rng.uniform(0.004, 0.02, size=n_sat)
            sat_large_total = float(rng.uniform(0.5, 0.75))
            sat_large = sat_large_total * sat_small / sat_small.sum()
            comps.append(
                MixtureComponent(
                    mean=main_mean,
                    std_lat=sigma,
                    std_lng=sigma * float(rng.uniform(0.85, 1.2)),
                    weight_small=float(1.0 - sat_small.sum()),
                    weight_large=float(1.0 - sat_large_total),
                )
            )
            for k in range(n_sat):
                angle = float(rng.uniform(0.0, 2.0 * math.pi))
                dist = float(rng.uniform(0.25, 0.55))
                sat_sigma = max(0.02, sigma * float(rng.uniform(0.3, 0.6)))
                comps.append(
                    MixtureComponent(
                        mean=GeoPoint(lat + dist * math.sin(angle), lng + dist * math.cos(angle)),
                        std_lat=sat_sigma,
                        std_lng=sat_sigma,
                        weight_small=float(sat_small[k]),
                        weight_large=float(sat_large[k]),
                    )
                )
        else:
            comps.append(
                MixtureComponent(
                    mean=main_mean,
                    std_lat=sigma,
                    std_lng=sigma * float(rng.uniform(0.85, 1.2)),
                    weight_small=1.0,
                    weight_large=1.0,
                )
            )

        metro = f"m{math.floor(lat / config.metro_cell_deg)}_{math.floor(lng / config.metro_cell_deg)}"
        band = min(config.n_countries - 1, int((lng - config.lng_min) / lng_band))
        destinations.append(
            Destination(
                location_id=f"loc{i:04d}",
                location_type=loc_type,
                center=center,
                admin_bounds=admin,
                components=tuple(comps),
                popularity=float(popularity[i]),
                metro_id=metro,
                country_code=f"country_{band}",
            )
        )

    shares = popularity + config.listing_share_smoothing / n
    counts = _largest_remainder_alloc(config.n_listings, shares, config.min_listings_per_destination)

    listings: list[Listing] = []
    lid = 0
    for i, dest in enumerate(destinations):
        w_small = dest.weights(False)
        w_large = dest.weights(True)
        # Listing supply leans toward everyday demand but keeps satellite
        # neighborhoods stocked (those are where the group-friendly homes are).
        mix = 0.6 * w_small + 0.4 * w_large
        mix = mix / mix.sum()
        for _ in range(int(counts[i])):
            ci = int(rng.choice(len(dest.components), p=mix))
            comp = dest.components[ci]
            loc = GeoPoint(
                clamp_lat(float(rng.normal(comp.mean.lat, comp.std_lat * 1.15))),
                clamp_lng(float(rng.normal(comp.mean.lng, comp.std_lng * 1.15))),
            )
            capacity = _draw_capacity(rng, SATELLITE_CAPACITY_DIST if ci > 0 else MAIN_CAPACITY_DIST)
            price = float(np.round(rng.lognormal(math.log(120.0), 0.5), 2))
            listings.append(Listing(listing_id=lid, location=loc, capacity=capacity, nightly_price=price))
            lid += 1

    index = GridIndex(
        lats=np.array([l.location.lat for l in listings]),
        lngs=np.array([l.location.lng for l in listings]),
        capacities=np.array([l.capacity for l in listings]),
        cell_deg=config.grid_cell_deg,
    )
    return World(config=config, seed=seed, destinations=destinations, listings=listings, index=index)


# ---------------------------------------------------------------------------
# Serialization (JSON lines; identical bytes for identical worlds)
# ---------------------------------------------------------------------------


def _dest_to_dict(d: Destination) -> dict:
    return {
        "record": "destination",
        "location_id": d.location_id,
        "location_type": d.location_type,
        "center": [d.center.lat, d.center.lng],
        "admin_bounds": [d.admin_bounds.sw.lat, d.admin_bounds.sw.lng, d.admin_bounds.ne.lat, d.admin_bounds.ne.lng],
        "components": [
            {
                "mean": [c.mean.lat, c.mean.lng],
                "std_lat": c.std_lat,
                "std_lng": c.std_lng,
                "weight_small": c.weight_small,
                "weight_large": c.weight_large,
            }
            for c in d.components
        ],
        "popularity": d.popularity,
        "metro_id": d.metro_id,
        "country_code": d.country_code,
    }


def save_world(world: World, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(
            json.dumps(
                {"record": "world", "seed": world.seed, "config": world.config.to_json_dict()},
                sort_keys=True,
            )
            + "\n"
        )
        for d in world.destinations:
            f.write(json.dumps(_dest_to_dict(d), sort_keys=True) + "\n")
        for l in world.listings:
            f.write(
                json.dumps(
                    {
                        "record": "listing",
                        "listing_id": l.listing_id,
                        "location": [l.location.lat, l.location.lng],
                        "capacity": l.capacity,
                        "nightly_price": l.nightly_price,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def load_world(path: str | Path) -> World:
    destinations: list[Destination] = []
    listings: list[Listing] = []
    config: WorldConfig | None = None
    seed = 0
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            d = json.loads(line)
            kind = d.get("record")
            if kind == "world":
                config = WorldConfig.from_json_dict(d["config"])
                seed = int(d["seed"])
            elif kind == "destination":
                comps = tuple(
                    MixtureComponent(
                        mean=GeoPoint(*c["mean"]),
                        std_lat=c["std_lat"],
                        std_lng=c["std_lng"],
                        weight_small=c["weight_small"],
                        weight_large=c["weight_large"],
                    )
                    for c in d["components"]
                )
                sw_lat, sw_lng, ne_lat, ne_lng = d["admin_bounds"]
                destinations.append(
                    Destination(
                        location_id=d["location_id"],
                        location_type=d["location_type"],
                        center=GeoPoint(*d["center"]),
                        admin_bounds=BoundingBox(GeoPoint(sw_lat, sw_lng), GeoPoint(ne_lat, ne_lng)),
                        components=comps,
                        popularity=d["popularity"],
                        metro_id=d["metro_id"],
                        country_code=d["country_code"],
                    )
                )
            elif kind == "listing":
                listings.append(
                    Listing(
                        listing_id=int(d["listing_id"]),
                        location=GeoPoint(*d["location"]),
                        capacity=int(d["capacity"]),
                        nightly_price=float(d["nightly_price"]),
                    )
                )
            else:
                raise ValueError(f"unknown record kind: {kind!r}")
    if config is None:
        raise ValueError(f"{path} has no world header record")
    index = GridIndex(
        lats=np.array([l.location.lat for l in listings]),
        lngs=np.array([l.location.lng for l in listings]),
        capacities=np.array([l.capacity for l in listings]),
        cell_deg=config.grid_cell_deg,
    )
    return World(config=config, seed=seed, destinations=destinations, listings=listings, index=index)


def destination_cell_id(dest: Destination) -> str:
    return surface_cell_id(dest.center)
