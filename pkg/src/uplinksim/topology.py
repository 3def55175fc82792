"""Network geometry: base stations, sector beams, mobile placement, association.

Sector ids are 1-based and globally unique: the station at list index si
owns ids si*zeta+1 .. si*zeta+zeta, in order of increasing beam offset.
Serving-map entries of -1 mark mobiles deactivated by capacity enforcement.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .propagation import PropagationParams, shadow_sigma

TWO_PI = 2.0 * math.pi


class PlacementInfeasibleError(RuntimeError):
    """Exclusion-zone rejection budget exhausted while placing mobiles."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle, km."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self) -> None:
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("rectangle must have positive extent")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> np.ndarray:
        return np.array([0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax)])

    def contains_rect(self, other: "Rect") -> bool:
        return (
            other.xmin >= self.xmin
            and other.ymin >= self.ymin
            and other.xmax <= self.xmax
            and other.ymax <= self.ymax
        )

    def scaled(self, factor: float, about: Optional[np.ndarray] = None) -> "Rect":
        c = self.center if about is None else np.asarray(about, dtype=float)
        return Rect(
            c[0] + factor * (self.xmin - c[0]),
            c[1] + factor * (self.ymin - c[1]),
            c[0] + factor * (self.xmax - c[0]),
            c[1] + factor * (self.ymax - c[1]),
        )

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        pts = rng.random((n, 2))
        pts[:, 0] = self.xmin + pts[:, 0] * self.width
        pts[:, 1] = self.ymin + pts[:, 1] * self.height
        return pts


@dataclass(frozen=True, eq=False)
class BaseStation:
    id: int
    position: np.ndarray  # (2,) km


@dataclass(frozen=True)
class Sector:
    id: int  # 1-based, globally unique
    station_id: int
    offset: float  # start angle psi of the beam, radians in [0, 2pi)
    width: float  # 2pi / zeta


def build_sectors(
    stations: Sequence[BaseStation],
    zeta: int,
    offsets: Optional[Sequence[float]] = None,
) -> list[Sector]:
    """zeta uniform sector beams per station.

    Beam k (0-based) of station si starts at offsets[si] + 2*pi*k/zeta and
    the beams of one station partition [0, 2pi).  offsets defaults to 0 for
    every station.
    """
    if zeta < 1:
        raise ValueError("zeta must be a positive integer")
    width = TWO_PI / zeta
    sectors = []
    for si, st in enumerate(stations):
        base = 0.0 if offsets is None else float(offsets[si]) % TWO_PI
        for k in range(zeta):
            sectors.append(
                Sector(
                    id=si * zeta + k + 1,
                    station_id=st.id,
                    offset=(base + k * width) % TWO_PI,
                    width=width,
                )
            )
    return sectors


def covering_sector(station: BaseStation, sectors: Sequence[Sector], x: np.ndarray) -> int:
    """Id of the station's sector whose half-open beam interval covers x."""
    d = np.asarray(x, dtype=float) - station.position
    if d[0] == 0.0 and d[1] == 0.0:
        raise ValueError("bearing undefined: point coincides with station")
    theta = math.atan2(d[1], d[0]) % TWO_PI
    for s in sectors:
        if s.station_id != station.id:
            continue
        if (theta - s.offset) % TWO_PI < s.width:
            return s.id
    raise ValueError(f"no sector of station {station.id} covers angle {theta}")


class NetworkTopology:
    """Immutable station/sector layout over a rectangular region.

    The sector list must follow the canonical id/offset scheme produced by
    build_sectors, which keeps covering-sector lookups pure index
    arithmetic.
    """

    def __init__(
        self,
        stations: Sequence[BaseStation],
        sectors: Sequence[Sector],
        region: Rect,
        window: Rect,
    ):
        if not stations:
            raise ValueError("at least one station required")
        ids = [st.id for st in stations]
        if len(set(ids)) != len(ids):
            raise ValueError("station ids must be unique")
        if not region.contains_rect(window):
            raise ValueError("measurement window must lie within the region")
        if len(sectors) % len(stations) != 0:
            raise ValueError("sector count must be a multiple of the station count")
        zeta = len(sectors) // len(stations)
        width = TWO_PI / zeta
        for si, st in enumerate(stations):
            for k in range(zeta):
                s = sectors[si * zeta + k]
                if s.id != si * zeta + k + 1 or s.station_id != st.id:
                    raise ValueError("sectors must follow the canonical id scheme")
                if abs(s.width - width) > 1e-12:
                    raise ValueError("sector widths must equal 2*pi/zeta")
                expect = (sectors[si * zeta].offset + k * width) % TWO_PI
                if abs((s.offset - expect + math.pi) % TWO_PI - math.pi) > 1e-9:
                    raise ValueError("sector offsets of one station must partition the circle")

        self.stations = list(stations)
        self.sectors = list(sectors)
        self.region = region
        self.window = window
        self._zeta = zeta
        self._positions = np.array([st.position for st in stations], dtype=float)
        if not np.all(np.isfinite(self._positions)):
            raise ValueError("station positions must be finite")
        self._base_offsets = np.array([sectors[si * zeta].offset for si in range(len(stations))])

    @classmethod
    def from_stations(
        cls,
        stations: Sequence[BaseStation],
        zeta: int,
        region: Rect,
        window: Rect,
        offsets: Optional[Sequence[float]] = None,
    ) -> "NetworkTopology":
        return cls(stations, build_sectors(stations, zeta, offsets), region, window)

    @property
    def n_stations(self) -> int:
        return len(self.stations)

    @property
    def n_sectors(self) -> int:
        return len(self.sectors)

    @property
    def zeta(self) -> int:
        return self._zeta

    @property
    def station_positions(self) -> np.ndarray:
        """(C, 2) array of station coordinates in km."""
        return self._positions

    def sector(self, sector_id: int) -> Sector:
        return self.sectors[sector_id - 1]

    def sector_station_index(self, sector_id) -> np.ndarray:
        return (np.asarray(sector_id) - 1) // self._zeta

    def sector_position(self, sector_id) -> np.ndarray:
        """Receiver coordinates of the given sector id(s) (the station's)."""
        return self._positions[self.sector_station_index(sector_id)]

    def covering_sector_ids(self, points: np.ndarray) -> np.ndarray:
        """(N, C) covering sector id of every station for every point.

        Points exactly on a station get the bearing atan2(0, 0) = 0; the
        scalar covering_sector op rejects that case instead.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        dx = pts[:, None, 0] - self._positions[None, :, 0]
        dy = pts[:, None, 1] - self._positions[None, :, 1]
        theta = np.arctan2(dy, dx) % TWO_PI
        width = TWO_PI / self._zeta
        k = np.floor(((theta - self._base_offsets[None, :]) % TWO_PI) / width).astype(int)
        np.clip(k, 0, self._zeta - 1, out=k)
        blocks = np.arange(self.n_stations) * self._zeta
        return blocks[None, :] + k + 1

    def sector_beam_covers(self, sector_id: int, theta) -> np.ndarray:
        """Boolean mask: does the sector's half-open beam cover the angle(s)."""
        s = self.sector(sector_id)
        return (np.asarray(theta, dtype=float) - s.offset) % TWO_PI < s.width

    def scaled(self, factor: float) -> "NetworkTopology":
        """Topology with all coordinates scaled about the region center."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        c = self.region.center
        stations = [
            BaseStation(st.id, c + factor * (st.position - c)) for st in self.stations
        ]
        return NetworkTopology(
            stations,
            self.sectors,
            self.region.scaled(factor),
            self.window.scaled(factor, about=c),
        )


def place_mobiles(
    region: Rect,
    m: int,
    d0: float,
    rng: np.random.Generator,
    max_attempts: int = 10_000,
) -> np.ndarray:
    """Uniform placement with sequential exclusion-zone rejection.

    Law: mobile i is the first uniform draw (from its own candidate
    sequence) that keeps distance >= d0 from the final positions of
    mobiles 0..i-1.  Conflicts are rare at realistic densities, so the
    batch below accepts the conflict-free bulk in one shot and fixes the
    leftovers in index order, which reproduces that law exactly.
    """
    if m < 0:
        raise ValueError("mobile count must be nonnegative")
    if d0 <= 0:
        raise ValueError("exclusion radius must be positive")
    if m == 0:
        return np.empty((0, 2))

    pos = region.sample(rng, m)
    attempts = np.ones(m, dtype=np.int64)
    while True:
        tree = cKDTree(pos)
        pairs = tree.query_pairs(d0, output_type="ndarray")
        if pairs.size == 0:
            return pos
        moved: dict[int, np.ndarray] = {}
        for j in np.unique(pairs.max(axis=1)):
            j = int(j)

            def clear(cand: np.ndarray) -> bool:
                # lower-index neighbours decide; points redrawn this round
                # are stale in the tree and checked against their new spot
                for i in tree.query_ball_point(cand, d0):
                    if i < j and i not in moved:
                        return False
                for i, p in moved.items():
                    if i < j and np.hypot(*(cand - p)) < d0:
                        return False
                return True

            cand = pos[j]
            while not clear(cand):
                if attempts[j] >= max_attempts:
                    raise PlacementInfeasibleError(
                        f"mobile {j}: no exclusion-zone-respecting position "
                        f"in {max_attempts} attempts"
                    )
                cand = region.sample(rng, 1)[0]
                attempts[j] += 1
            moved[j] = cand
        for j, p in moved.items():
            pos[j] = p


class Association:
    """Shadowed-gain candidate table of one realization.

    Candidates are the covering sectors, one per station.  score_db holds
    the shadowed local-mean gain xi + 10 log10 f in dB, so rankings match
    the linear gains exactly.  Covering sector ids are derived lazily, one
    station column or one mobile row at a time, because only the serving
    station's column and a few reassignment rows are ever needed.
    """

    def __init__(
        self,
        topo: NetworkTopology,
        mobiles: np.ndarray,
        xi_db: np.ndarray,
        score_db: np.ndarray,
        serving: np.ndarray,
    ):
        self.topo = topo
        self.mobiles = mobiles
        self.xi_db = xi_db
        self.score_db = score_db
        self.serving = serving
        self._cover_columns: dict[int, np.ndarray] = {}

    def cover_column(self, station_index: int) -> np.ndarray:
        """(M,) covering sector id of one station for every mobile."""
        col = self._cover_columns.get(station_index)
        if col is None:
            pos = self.topo.station_positions[station_index]
            d = self.mobiles - pos
            col = _covering_ids_for_station(self.topo, station_index, d[:, 0], d[:, 1])
            self._cover_columns[station_index] = col
        return col

    def cover_row(self, i: int) -> np.ndarray:
        """(C,) covering sector ids of every station for mobile i."""
        d = self.mobiles[i] - self.topo.station_positions
        blocks = np.arange(self.topo.n_stations) * self.topo.zeta
        return blocks + _covering_k(self.topo, d[:, 0], d[:, 1], None) + 1


def _covering_k(topo: NetworkTopology, dx, dy, station_index) -> np.ndarray:
    theta = np.arctan2(dy, dx) % TWO_PI
    base = (
        topo._base_offsets
        if station_index is None
        else topo._base_offsets[station_index]
    )
    width = TWO_PI / topo.zeta
    k = np.floor(((theta - base) % TWO_PI) / width).astype(int)
    return np.clip(k, 0, topo.zeta - 1)


def _covering_ids_for_station(topo, station_index, dx, dy) -> np.ndarray:
    return station_index * topo.zeta + _covering_k(topo, dx, dy, station_index) + 1


def associate(
    mobiles: np.ndarray,
    topo: NetworkTopology,
    prop: PropagationParams,
    rng: np.random.Generator,
    shadowing: bool = True,
) -> Association:
    """Serving-sector map: argmax over stations of shadowed local-mean gain.

    Ties fall to the lowest sector id (first argmax hit).  One shadowing
    factor is drawn per (mobile, candidate sector); without shadowing the
    winner is simply the nearest station's covering sector.
    """
    mobiles = np.asarray(mobiles, dtype=float)
    n = len(mobiles)
    if n == 0:
        empty = np.empty((0, topo.n_stations))
        return Association(topo, mobiles, empty, empty, np.empty(0, dtype=int))
    dx = mobiles[:, 0:1] - topo.station_positions[None, :, 0]
    dy = mobiles[:, 1:2] - topo.station_positions[None, :, 1]
    dist = np.hypot(dx, dy)

    # one tanh serves the exponent and the shadowing deviation
    t = np.tanh(prop.mu_per_km * dist)
    if shadowing:
        sigma = prop.sigma_min_db + (prop.sigma_max_db - prop.sigma_min_db) * t
        xi = rng.standard_normal(dist.shape) * sigma
    else:
        xi = np.zeros_like(dist)
    clamped = dist < prop.d0_km
    if clamped.any():
        t = np.where(clamped, math.tanh(prop.mu_per_km * prop.d0_km), t)
        dist = np.maximum(dist, prop.d0_km)
    alpha = prop.alpha_min + (prop.alpha_max - prop.alpha_min) * t
    score = xi - 10.0 * alpha * np.log10(dist / prop.d0_km)

    rows = np.arange(n)
    best = np.argmax(score, axis=1)
    serving = (
        best * topo.zeta
        + _covering_k(topo, dx[rows, best], dy[rows, best], best)
        + 1
    )
    return Association(topo, mobiles, xi, score, serving)


def enforce_capacity(
    assoc: Association,
    caps: np.ndarray,
    rng: np.random.Generator,
):
    """Cap every sector load; overflow moves to the next-best covered sector.

    Overflow mobiles are drawn uniformly from the full sector, re-ranked by
    their own shadowed gains, and placed in the best covering sector with
    spare capacity.  A mobile with nowhere to go is marked inactive (-1).
    Returns (serving, loads) with loads indexed by sector id - 1.
    """
    n_sectors = assoc.topo.n_sectors
    serving = np.asarray(assoc.serving, dtype=int).copy()
    caps = np.broadcast_to(np.asarray(caps, dtype=int), (n_sectors,))
    loads = np.bincount(serving[serving > 0] - 1, minlength=n_sectors)
    for l in range(1, n_sectors + 1):
        over = loads[l - 1] - caps[l - 1]
        if over <= 0:
            continue
        members = np.flatnonzero(serving == l)
        for i in rng.choice(members, size=over, replace=False):
            loads[l - 1] -= 1
            serving[i] = -1
            cover = assoc.cover_row(i)
            for si in np.argsort(-assoc.score_db[i], kind="stable"):
                cand = cover[si]
                if cand != l and loads[cand - 1] < caps[cand - 1]:
                    serving[i] = cand
                    loads[cand - 1] += 1
                    break
    return serving, loads


class NetworkRealization:
    """One drawn network: mobile positions, shadowing, serving map, loads.

    Shadowing draws are cached so a (mobile, sector) pair sees exactly one
    value within the realization; covering-sector draws come from the
    association table, anything else is drawn lazily from the
    realization's stream.  Not safe to share across threads while lazy
    draws may still occur.
    """

    def __init__(
        self,
        topo: NetworkTopology,
        prop: PropagationParams,
        mobiles: np.ndarray,
        assoc: Association,
        serving: np.ndarray,
        loads: np.ndarray,
        shadowing: bool,
        rng: np.random.Generator,
    ):
        self.topo = topo
        self.prop = prop
        self.mobiles = mobiles
        self.assoc = assoc
        self.serving = serving
        self.loads = loads
        self.shadowing = shadowing
        self._rng = rng
        self._extra_xi: dict[tuple[int, int], float] = {}
        self._members: Optional[list[np.ndarray]] = None

    @property
    def n_mobiles(self) -> int:
        return len(self.mobiles)

    @property
    def active(self) -> np.ndarray:
        return self.serving > 0

    def sector_members(self, sector_id: int) -> np.ndarray:
        if self._members is None:
            order = np.argsort(self.serving, kind="stable")
            self._members = [np.empty(0, dtype=int)] * (self.topo.n_sectors + 1)
            start = np.searchsorted(self.serving[order], np.arange(1, self.topo.n_sectors + 2))
            for l in range(1, self.topo.n_sectors + 1):
                self._members[l] = order[start[l - 1] : start[l]]
        return self._members[sector_id]

    def shadow_db(self, i: int, sector_id: int) -> float:
        return float(self.shadow_db_many(np.array([i]), sector_id)[0])

    def shadow_db_many(self, idx: np.ndarray, sector_id: int) -> np.ndarray:
        """Shadowing factors xi_{i, sector} in dB for mobiles idx."""
        if not self.shadowing:
            return np.zeros(len(idx), dtype=float)
        si = int(self.sector_station_index(sector_id))
        out = np.empty(len(idx), dtype=float)
        covered = self.assoc.cover_column(si)[idx] == sector_id
        out[covered] = self.assoc.xi_db[idx[covered], si]
        missing = []
        for pos, i in enumerate(idx):
            if covered[pos]:
                continue
            key = (int(i), sector_id)
            val = self._extra_xi.get(key)
            if val is None:
                missing.append((pos, key))
            else:
                out[pos] = val
        if missing:
            pts = self.mobiles[[int(k[0]) for _, k in missing]]
            d = np.hypot(*(pts - self.topo.station_positions[si]).T)
            draws = self._rng.normal(0.0, shadow_sigma(d, self.prop))
            for (pos, key), v in zip(missing, draws):
                self._extra_xi[key] = float(v)
                out[pos] = v
        return out

    def shadow_db_serving(self, idx: np.ndarray) -> np.ndarray:
        """Cached shadowing toward each mobile's serving sector."""
        if not self.shadowing:
            return np.zeros(len(idx), dtype=float)
        si = self.sector_station_index(self.serving[idx])
        return self.assoc.xi_db[idx, si]

    def sector_station_index(self, sector_id) -> np.ndarray:
        return self.topo.sector_station_index(sector_id)


def build_realization(
    topo: NetworkTopology,
    prop: PropagationParams,
    m: int,
    rng: np.random.Generator,
    *,
    shadowing: bool = True,
    sector_caps: Optional[np.ndarray] = None,
    max_attempts: int = 10_000,
) -> NetworkRealization:
    """Place, associate and (optionally) capacity-limit one realization."""
    mobiles = place_mobiles(topo.region, m, prop.d0_km, rng, max_attempts=max_attempts)
    assoc = associate(mobiles, topo, prop, rng, shadowing=shadowing)
    if sector_caps is not None:
        serving, loads = enforce_capacity(assoc, sector_caps, rng)
    else:
        serving = assoc.serving
        loads = np.bincount(serving[serving > 0] - 1, minlength=topo.n_sectors)
    return NetworkRealization(topo, prop, mobiles, assoc, serving, loads, shadowing, rng)


def load_topology_csv(path, region: Rect, window: Rect, zeta: int) -> NetworkTopology:
    """Read a station table (header id,x_km,y_km[,offset_rad]) into a topology."""
    stations = []
    offsets = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["id", "x_km", "y_km"]:
            raise ValueError(f"{path}: expected header id,x_km,y_km")
        has_offset = len(header) > 3 and header[3].strip() == "offset_rad"
        for row in reader:
            if not row:
                continue
            stations.append(BaseStation(int(row[0]), np.array([float(row[1]), float(row[2])])))
            offsets.append(float(row[3]) if has_offset else 0.0)
    if not stations:
        raise ValueError(f"{path}: no stations")
    return NetworkTopology.from_stations(stations, zeta, region, window, offsets)


def save_topology_csv(path, stations: Sequence[BaseStation]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "x_km", "y_km"])
        for st in stations:
            writer.writerow([st.id, repr(float(st.position[0])), repr(float(st.position[1]))])


def generate_grid_stations(
    n: int,
    region: Rect,
    jitter_km: float,
    rng: np.random.Generator,
) -> list[BaseStation]:
    """Perturbed-grid station layout: n cells of a near-square grid, each
    station at the cell center plus a uniform jitter, clipped to the region."""
    if n < 1:
        raise ValueError("need at least one station")
    if jitter_km < 0:
        raise ValueError("jitter must be nonnegative")
    side = math.ceil(math.sqrt(n))
    sx = region.width / side
    sy = region.height / math.ceil(n / side)
    stations = []
    for i in range(n):
        row, col = divmod(i, side)
        x = region.xmin + (col + 0.5) * sx
        y = region.ymin + (row + 0.5) * sy
        if jitter_km > 0:
            x += rng.uniform(-jitter_km, jitter_km)
            y += rng.uniform(-jitter_km, jitter_km)
        x = min(max(x, region.xmin), region.xmax)
        y = min(max(y, region.ymin), region.ymax)
        stations.append(BaseStation(i + 1, np.array([x, y])))
    return stations
