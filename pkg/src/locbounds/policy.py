"""Bounds-producing policies behind one interface.

Four families, in the order they historically replace each other:

* heuristics keyed on location type (administrative bounds verbatim, a fixed
  25-mile radius for cities, log-expanded administrative bounds for precise
  places);
* a per-destination statistics table (box over the nearest 96% of booked
  points, slightly expanded);
* the learned model served by its mean prediction;
* the exploration policy: mean plus lambda times an MC-dropout uncertainty.

Every policy is total: any well-formed request yields a valid clamped box.
"""

from __future__ import annotations

import abc
import json
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal

import numpy as np

from .featurizer import (
    ADMIN_VERBATIM_TYPES,
    RADIUS_TYPES,
    FeatureStats,
    FeatureVector,
    SearchRequest,
    Vocabulary,
    encode,
)
from .geo import (
    KM_PER_DEG_LAT,
    MILES_TO_KM,
    BoundingBox,
    ExtentOffsets,
    GeoPoint,
    box_size_km,
    clamp_lat,
    clamp_lng,
    expansion_factor,
    point_distance_km,
    scale_box,
    to_box,
)
from .model import ModelParams, forward_batch
from .seeding import dropout_mask

logger = logging.getLogger(__name__)

SigmaMode = Literal["mad", "std"]

DEFAULT_MC_SAMPLES = 32
DEFAULT_UCB_LAMBDA = 2.0
DEFAULT_SCORING_DROPOUT = 0.95
CITY_RADIUS_KM = 25.0 * MILES_TO_KM  # 40.2336 km


@dataclass(frozen=True)
class PolicyDecision:
    """A served box plus, for model policies, the score behind it."""

    box: BoundingBox
    mu: ExtentOffsets | None = None
    sigma: ExtentOffsets | None = None


class Policy(abc.ABC):
    """Anything that maps a search request to retrieval bounds."""

    name: str = "policy"

    @abc.abstractmethod
    def decide(self, req: SearchRequest) -> PolicyDecision: ...

    def bounds(self, req: SearchRequest) -> BoundingBox:
        return self.decide(req).box


def _radius_box(center: GeoPoint, radius_km: float) -> BoundingBox:
    """Square box circumscribing a radius-km circle around the center."""
    lat_off = radius_km / KM_PER_DEG_LAT
    cos_ref = max(math.cos(math.radians(center.lat)), 1e-2)
    lng_off = radius_km / (KM_PER_DEG_LAT * cos_ref)
    return BoundingBox(
        GeoPoint(clamp_lat(center.lat - lat_off), clamp_lng(center.lng - lng_off)),
        GeoPoint(clamp_lat(center.lat + lat_off), clamp_lng(center.lng + lng_off)),
    )


@dataclass(frozen=True)
class HeuristicConfig:
    city_radius_km: float = CITY_RADIUS_KM
    expansion_alpha: float = 2.9
    expansion_beta: float = -0.5


class HeuristicPolicy(Policy):
    """Cold-start rules keyed on the searched location's type."""

    name = "heuristic"

    def __init__(self, config: HeuristicConfig | None = None):
        self.config = config or HeuristicConfig()

    def decide(self, req: SearchRequest) -> PolicyDecision:
        cfg = self.config
        admin = req.admin_bounds
        if req.location_type in RADIUS_TYPES or admin is None:
            if admin is None and req.location_type not in RADIUS_TYPES:
                logger.warning(
                    "request %s (%s) lacks admin bounds; falling back to city radius",
                    req.location_id,
                    req.location_type,
                )
            return PolicyDecision(box=_radius_box(req.center, cfg.city_radius_km))
        if req.location_type in ADMIN_VERBATIM_TYPES:
            return PolicyDecision(box=admin)
        factor = expansion_factor(
            box_size_km(admin).diagonal_km, alpha=cfg.expansion_alpha, beta=cfg.expansion_beta
        )
        return PolicyDecision(box=scale_box(admin, factor))


class FixedRadiusPolicy(Policy):
    """Constant-radius box around the search center, any location type."""

    def __init__(self, radius_km: float, name: str | None = None):
        if radius_km <= 0:
            raise ValueError("radius must be positive")
        self.radius_km = radius_km
        self.name = name or f"fixed_radius_{radius_km:g}km"

    def decide(self, req: SearchRequest) -> PolicyDecision:
        return PolicyDecision(box=_radius_box(req.center, self.radius_km))


# ---------------------------------------------------------------------------
# Statistics policy
# ---------------------------------------------------------------------------


@dataclass
class StatsEntry:
    """Booked points of one destination, sorted by distance to its center."""

    lats: np.ndarray
    lngs: np.ndarray
    dists_km: np.ndarray

    @property
    def count(self) -> int:
        return int(self.lats.size)


@dataclass
class StatsTable:
    """Per-destination booked-point datasets for the statistics policy."""

    entries: dict[str, StatsEntry]

    def to_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for loc_id in sorted(self.entries):
                e = self.entries[loc_id]
                f.write(
                    json.dumps(
                        {
                            "location_id": loc_id,
                            "lats": e.lats.tolist(),
                            "lngs": e.lngs.tolist(),
                            "dists_km": e.dists_km.tolist(),
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "StatsTable":
        entries = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                d = json.loads(line)
                entries[d["location_id"]] = StatsEntry(
                    lats=np.asarray(d["lats"], dtype=np.float64),
                    lngs=np.asarray(d["lngs"], dtype=np.float64),
                    dists_km=np.asarray(d["dists_km"], dtype=np.float64),
                )
        return cls(entries=entries)


def build_stats_table(bookings: Iterable[tuple[str, GeoPoint, GeoPoint]]) -> StatsTable:
    """Group (location_id, booked point, search center) triples by destination.

    Points are stored sorted by distance to the destination center (stable
    sort, so ties keep insertion order), with containment applied at query
    time so the retained fraction stays configurable.
    """
    grouped: dict[str, list[tuple[float, float, float]]] = {}
    for loc_id, booked, center in bookings:
        d = point_distance_km(booked, center, ref_lat=center.lat)
        grouped.setdefault(loc_id, []).append((booked.lat, booked.lng, d))
    entries = {}
    for loc_id, rows in grouped.items():
        lats = np.array([r[0] for r in rows])
        lngs = np.array([r[1] for r in rows])
        dists = np.array([r[2] for r in rows])
        order = np.argsort(dists, kind="stable")
        entries[loc_id] = StatsEntry(lats=lats[order], lngs=lngs[order], dists_km=dists[order])
    if not entries:
        raise ValueError("no bookings to build a statistics table from")
    return StatsTable(entries=entries)


def stats_bounds(
    table: StatsTable,
    req: SearchRequest,
    containment: float = 0.96,
    expansion: float = 1.1,
    fallback: Policy | None = None,
) -> BoundingBox:
    """Minimal box over the nearest ``containment`` fraction of booked points,
    scaled by ``expansion``.  Unknown destinations fall back to heuristics.
    The output depends only on the searched location, never on trip details."""
    if not 0.0 < containment <= 1.0:
        raise ValueError("containment must be in (0, 1]")
    entry = table.entries.get(req.location_id)
    if entry is None:
        return (fallback or HeuristicPolicy()).bounds(req)
    k = max(1, math.ceil(containment * entry.count))
    lats = entry.lats[:k]
    lngs = entry.lngs[:k]
    box = BoundingBox(
        GeoPoint(float(lats.min()), float(lngs.min())),
        GeoPoint(float(lats.max()), float(lngs.max())),
    )
    return scale_box(box, expansion)


class StatsPolicy(Policy):
    name = "stats"

    def __init__(
        self,
        table: StatsTable,
        containment: float = 0.96,
        expansion: float = 1.1,
        fallback: Policy | None = None,
    ):
        self.table = table
        self.containment = containment
        self.expansion = expansion
        self.fallback = fallback or HeuristicPolicy()

    def decide(self, req: SearchRequest) -> PolicyDecision:
        return PolicyDecision(
            box=stats_bounds(
                self.table, req, self.containment, self.expansion, fallback=self.fallback
            )
        )


# ---------------------------------------------------------------------------
# Model policies: MC-dropout scoring, mean and UCB boxes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UncertaintyEstimate:
    """Mean and per-component dispersion of MC-dropout samples."""

    mu: ExtentOffsets
    sigma: ExtentOffsets
    n_samples: int

    def __post_init__(self) -> None:
        if any(s < 0 for s in self.sigma):
            raise ValueError("sigma components must be nonnegative")


def mc_sample_offsets(
    params: ModelParams,
    fv: FeatureVector,
    n_samples: int = DEFAULT_MC_SAMPLES,
    dropout_rate: float = DEFAULT_SCORING_DROPOUT,
) -> np.ndarray:
    """The raw (n_samples, 4) offset samples behind an uncertainty estimate.

    Mask i derives from SHA-256 of (model version, canonical feature bytes,
    i), so scoring is a pure function of model and request: repeat calls are
    bit-identical, masks are independent across samples, and any retrained
    model yields a fresh mask family.
    """
    if n_samples < 2:
        raise ValueError("need at least 2 samples for an uncertainty estimate")
    h = params.config.hidden_width
    version = params.version()
    fv_bytes = fv.canonical_bytes()
    masks = np.stack(
        [
            dropout_mask(("mc-score", version, fv_bytes, struct.pack("<q", i)), h, dropout_rate)
            for i in range(n_samples)
        ]
    )
    cat = np.tile(fv.categorical, (n_samples, 1))
    cont = np.tile(fv.continuous, (n_samples, 1))
    samples, _ = forward_batch(params, cat, cont, masks=masks, dropout_rate=dropout_rate)
    return samples


def mc_dropout_score(
    params: ModelParams,
    fv: FeatureVector,
    n_samples: int = DEFAULT_MC_SAMPLES,
    dropout_rate: float = DEFAULT_SCORING_DROPOUT,
    sigma_mode: SigmaMode = "mad",
) -> UncertaintyEstimate:
    """Mean/dispersion of ``n_samples`` dropout-enabled forward passes.

    ``sigma_mode="mad"`` is the served definition (mean absolute deviation,
    sum of |sample - mu| over N); ``"std"`` switches to the population
    standard deviation for comparison.
    """
    samples = mc_sample_offsets(params, fv, n_samples=n_samples, dropout_rate=dropout_rate)
    mu = samples.mean(axis=0)
    dev = samples - mu
    if sigma_mode == "mad":
        sigma = np.abs(dev).mean(axis=0)
    elif sigma_mode == "std":
        sigma = np.sqrt((dev * dev).mean(axis=0))
    else:
        raise ValueError(f"unknown sigma mode: {sigma_mode!r}")
    return UncertaintyEstimate(
        mu=ExtentOffsets(*(float(v) for v in mu)),
        sigma=ExtentOffsets(*(float(v) for v in sigma)),
        n_samples=n_samples,
    )


def ucb_offsets(estimate: UncertaintyEstimate, lam: float) -> ExtentOffsets:
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return ExtentOffsets(*(m + lam * s for m, s in zip(estimate.mu, estimate.sigma)))


def ucb_bounds(
    params: ModelParams,
    req: SearchRequest,
    vocab: Vocabulary,
    stats: FeatureStats,
    lam: float = DEFAULT_UCB_LAMBDA,
    n_samples: int = DEFAULT_MC_SAMPLES,
    dropout_rate: float = DEFAULT_SCORING_DROPOUT,
    sigma_mode: SigmaMode = "mad",
) -> BoundingBox:
    """Optimistic box from offsets mu + lam*sigma; lam=0 is the mean policy."""
    fv = encode(req, vocab, stats)
    est = mc_dropout_score(
        params, fv, n_samples=n_samples, dropout_rate=dropout_rate, sigma_mode=sigma_mode
    )
    return to_box(req.center, ucb_offsets(est, lam))


class McDropoutUcbPolicy(Policy):
    """Serve mu + lambda*sigma boxes from MC-dropout scores of a trained model."""

    def __init__(
        self,
        params: ModelParams,
        vocab: Vocabulary,
        stats: FeatureStats,
        lam: float = DEFAULT_UCB_LAMBDA,
        n_samples: int = DEFAULT_MC_SAMPLES,
        dropout_rate: float = DEFAULT_SCORING_DROPOUT,
        sigma_mode: SigmaMode = "mad",
        name: str | None = None,
    ):
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        self.params = params
        self.vocab = vocab
        self.stats = stats
        self.lam = lam
        self.n_samples = n_samples
        self.dropout_rate = dropout_rate
        self.sigma_mode: SigmaMode = sigma_mode
        self.name = name or (f"ucb_lambda{lam:g}" if lam > 0 else "ml_mean")

    def score(self, req: SearchRequest) -> UncertaintyEstimate:
        fv = encode(req, self.vocab, self.stats)
        return mc_dropout_score(
            self.params,
            fv,
            n_samples=self.n_samples,
            dropout_rate=self.dropout_rate,
            sigma_mode=self.sigma_mode,
        )

    def decide(self, req: SearchRequest) -> PolicyDecision:
        est = self.score(req)
        offsets = ucb_offsets(est, self.lam)
        return PolicyDecision(box=to_box(req.center, offsets), mu=est.mu, sigma=est.sigma)


def ml_mean_policy(
    params: ModelParams,
    vocab: Vocabulary,
    stats: FeatureStats,
    n_samples: int = DEFAULT_MC_SAMPLES,
    dropout_rate: float = DEFAULT_SCORING_DROPOUT,
    sigma_mode: SigmaMode = "mad",
) -> McDropoutUcbPolicy:
    """The learned policy scored by its MC mean (lambda = 0)."""
    return McDropoutUcbPolicy(
        params,
        vocab,
        stats,
        lam=0.0,
        n_samples=n_samples,
        dropout_rate=dropout_rate,
        sigma_mode=sigma_mode,
        name="ml_mean",
    )
