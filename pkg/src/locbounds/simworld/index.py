"""Uniform lat/lng grid over the listing corpus for box and radius queries."""

from __future__ import annotations

import math

import numpy as np

from ..geo import KM_PER_DEG_LAT, BoundingBox, GeoPoint


class GridIndex:
    """Cell -> listing-id index; results match a brute-force scan exactly."""

    def __init__(
        self,
        lats: np.ndarray,
        lngs: np.ndarray,
        capacities: np.ndarray | None = None,
        cell_deg: float = 0.1,
    ):
        if cell_deg <= 0:
            raise ValueError("cell size must be positive")
        self.cell_deg = cell_deg
        self.lats = np.asarray(lats, dtype=np.float64)
        self.lngs = np.asarray(lngs, dtype=np.float64)
        self.capacities = (
            np.asarray(capacities, dtype=np.int64)
            if capacities is not None
            else np.ones(self.lats.size, dtype=np.int64)
        )
        ci = np.floor(self.lats / cell_deg).astype(np.int64)
        cj = np.floor(self.lngs / cell_deg).astype(np.int64)
        cells: dict[tuple[int, int], list[int]] = {}
        for idx in range(self.lats.size):
            cells.setdefault((int(ci[idx]), int(cj[idx])), []).append(idx)
        self.cells = {key: np.array(ids, dtype=np.int64) for key, ids in cells.items()}

    def __len__(self) -> int:
        return int(self.lats.size)

    def _gather(self, lat_lo: float, lat_hi: float, lng_lo: float, lng_hi: float) -> np.ndarray:
        c = self.cell_deg
        i_lo, i_hi = math.floor(lat_lo / c), math.floor(lat_hi / c)
        j_lo, j_hi = math.floor(lng_lo / c), math.floor(lng_hi / c)
        chunks = []
        for i in range(i_lo, i_hi + 1):
            for j in range(j_lo, j_hi + 1):
                ids = self.cells.get((i, j))
                if ids is not None:
                    chunks.append(ids)
        if not chunks:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate(chunks))

    def ids_in_box(self, box: BoundingBox) -> np.ndarray:
        """Listing ids inside the box (closed edges), ascending."""
        cand = self._gather(box.sw.lat, box.ne.lat, box.sw.lng, box.ne.lng)
        if cand.size == 0:
            return cand
        lat = self.lats[cand]
        lng = self.lngs[cand]
        keep = (
            (lat >= box.sw.lat) & (lat <= box.ne.lat) & (lng >= box.sw.lng) & (lng <= box.ne.lng)
        )
        return cand[keep]

    def count_in_box(self, box: BoundingBox) -> int:
        return int(self.ids_in_box(box).size)

    def nearest_feasible(
        self, p: GeoPoint, radius_km: float, min_capacity: int = 1
    ) -> int | None:
        """Nearest listing within ``radius_km`` of ``p`` with enough capacity.

        Distance is the same axis-consistent planar metric used everywhere
        else (longitude scaled by cos of the query latitude).  Ties resolve
        to the lowest listing id.
        """
        cos_ref = max(math.cos(math.radians(p.lat)), 1e-2)
        dlat = radius_km / KM_PER_DEG_LAT
        dlng = radius_km / (KM_PER_DEG_LAT * cos_ref)
        cand = self._gather(p.lat - dlat, p.lat + dlat, p.lng - dlng, p.lng + dlng)
        if cand.size == 0:
            return None
        cand = cand[self.capacities[cand] >= min_capacity]
        if cand.size == 0:
            return None
        dy = (self.lats[cand] - p.lat) * KM_PER_DEG_LAT
        dx = (self.lngs[cand] - p.lng) * KM_PER_DEG_LAT * cos_ref
        d2 = dx * dx + dy * dy
        best = int(np.argmin(d2))
        if d2[best] > radius_km * radius_km:
            return None
        return int(cand[best])
