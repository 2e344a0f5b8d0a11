"""Squares, strip packings, densities and Koebe-type distortion bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import shapely
from shapely.geometry import Polygon, box as shapely_box

from .dynamics import StripSpec
from .errors import DegenerateInput, DomainError, TooCoarse

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Box:
    """Closed square ``center + exp(i*angle) * [-side/2, side/2]**2``."""

    center: complex
    side: float
    angle: float = 0.0

    def __post_init__(self):
        if not (self.side > 0 and math.isfinite(self.side)):
            raise DomainError(f"box side must be positive and finite, got {self.side!r}")
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "side", float(self.side))
        object.__setattr__(self, "angle", float(self.angle))

    @property
    def area(self) -> float:
        return self.side * self.side

    @property
    def diameter(self) -> float:
        return SQRT2 * self.side

    @property
    def rotation(self) -> complex:
        return complex(math.cos(self.angle), math.sin(self.angle))

    def corners(self) -> np.ndarray:
        h = 0.5 * self.side
        base = np.array([-h - 1j * h, h - 1j * h, h + 1j * h, -h + 1j * h])
        return self.center + self.rotation * base

    def boundary(self, per_edge: int = 16) -> np.ndarray:
        """Points on the boundary, ``per_edge`` per side, corners included."""
        c = self.corners()
        s = np.arange(per_edge) / per_edge
        return np.concatenate([c[i] + s * (c[(i + 1) % 4] - c[i]) for i in range(4)])

    def contains(self, z, tol: float = 0.0):
        w = (np.asarray(z, dtype=complex) - self.center) * self.rotation.conjugate()
        h = 0.5 * self.side + tol
        return (np.abs(w.real) <= h) & (np.abs(w.imag) <= h)

    def bbox(self) -> tuple[float, float, float, float]:
        c = self.corners()
        return float(c.real.min()), float(c.real.max()), float(c.imag.min()), float(c.imag.max())

    def polygon(self) -> Polygon:
        c = self.corners()
        return Polygon(list(zip(c.real, c.imag)))

    def is_r_box(self, r: float, rel: float = 1e-12) -> bool:
        return self.angle == 0.0 and abs(self.side - r) <= rel * r


@dataclass(frozen=True)
class BoxUnion:
    """Union of squares (overlaps allowed)."""

    boxes: tuple[Box, ...]

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=bool)
        for b in self.boxes:
            out |= b.contains(z)
        return out

    def bbox(self):
        bb = np.array([b.bbox() for b in self.boxes])
        return float(bb[:, 0].min()), float(bb[:, 1].max()), float(bb[:, 2].min()), float(bb[:, 3].max())

    def polygon(self):
        return shapely.unary_union([b.polygon() for b in self.boxes])


@dataclass(frozen=True)
class Intersection:
    a: object
    b: object

    def contains(self, z):
        return np.asarray(self.a.contains(z)) & np.asarray(self.b.contains(z))

    def bbox(self):
        ba, bb = _bbox_of(self.a), _bbox_of(self.b)
        if ba is None:
            return bb
        if bb is None:
            return ba
        return max(ba[0], bb[0]), min(ba[1], bb[1]), max(ba[2], bb[2]), min(ba[3], bb[3])


@dataclass(frozen=True)
class PredicateRegion:
    """Region given by a vectorized membership test and a bounding box."""

    predicate: Callable[[np.ndarray], np.ndarray]
    box: tuple[float, float, float, float]

    def contains(self, z):
        return np.asarray(self.predicate(np.asarray(z, dtype=complex)), dtype=bool)

    def bbox(self):
        return self.box


def _bbox_of(region):
    if isinstance(region, StripSpec):
        return None
    return region.bbox()


def _polygon_of(region, clip):
    """Shapely geometry of ``region`` clipped to ``clip`` or ``None`` if not polygonal."""
    x0, x1, y0, y1 = clip
    if isinstance(region, (Box, BoxUnion)):
        return region.polygon()
    if isinstance(region, StripSpec):
        bands = [shapely_box(x0, lo, x1, hi) for _, lo, hi in region.bands_between(y0, y1)]
        return shapely.unary_union(bands) if bands else Polygon()
    if isinstance(region, Intersection):
        pa, pb = _polygon_of(region.a, clip), _polygon_of(region.b, clip)
        if pa is None or pb is None:
            return None
        return pa.intersection(pb)
    return None


def density(a_region, b_region, samples: int = 1 << 16, seed: int = 0) -> float:
    """``|A cap B| / |B|``.

    Exact polygon arithmetic when both regions are built from boxes and
    strips. Otherwise uses stratified jittered sampling over the bounding
    box of ``B`` with a fixed seed.
    """
    bb = _bbox_of(b_region)
    if bb is None:
        raise DomainError("density denominator must be bounded")
    x0, x1, y0, y1 = bb
    if not (x1 > x0 and y1 > y0):
        raise DomainError("density denominator is degenerate")
    pb = _polygon_of(b_region, bb)
    pa = _polygon_of(a_region, bb)
    if pa is not None and pb is not None:
        area_b = pb.area
        if not area_b > 0:
            raise DomainError("density denominator has zero area")
        return float(pa.intersection(pb).area / area_b)
    m = max(1, int(math.ceil(math.sqrt(samples))))
    rng = np.random.default_rng(seed)
    ix, iy = np.meshgrid(np.arange(m), np.arange(m), indexing="xy")
    u = (ix.ravel() + rng.random(m * m)) / m
    v = (iy.ravel() + rng.random(m * m)) / m
    z = (x0 + u * (x1 - x0)) + 1j * (y0 + v * (y1 - y0))
    in_b = np.asarray(b_region.contains(z), dtype=bool)
    nb = int(in_b.sum())
    if nb == 0:
        raise DomainError("no samples landed in the density denominator")
    in_a = np.asarray(a_region.contains(z[in_b]), dtype=bool)
    return float(in_a.sum()) / nb


def default_c(r: float) -> float:
    """Default host-size factor: the host side must be at least ``c(r) * r``."""
    return 64.0 * max(1.0, 1.0 / r)


@dataclass(frozen=True)
class Packing:
    """Grid-aligned r-packing stored as row runs.

    Row ``runs[i] = (iy, ix_lo, ix_hi)`` holds the grid cells
    ``ix_lo <= ix < ix_hi``. Grid cell ``(ix, iy)`` is the square
    ``[ix*p, (ix+1)*p] x [iy*p, (iy+1)*p]`` with pitch ``p = r + eps``. Its
    r-box shares the cell centre.
    """

    r: float
    pitch: float
    host: Box
    strip: StripSpec
    runs: np.ndarray
    density: float
    density_in_strip: float

    @property
    def count(self) -> int:
        if self.runs.size == 0:
            return 0
        return int((self.runs[:, 2] - self.runs[:, 1]).sum())

    @property
    def area(self) -> float:
        return self.count * self.r * self.r

    @property
    def indices(self) -> np.ndarray:
        """``(count, 2)`` array of ``(ix, iy)`` sorted by row, then column."""
        if self.count == 0:
            return np.zeros((0, 2), dtype=np.int64)
        parts = [
            np.stack([np.arange(lo, hi), np.full(hi - lo, iy)], axis=1)
            for iy, lo, hi in self.runs
        ]
        return np.concatenate(parts).astype(np.int64)

    @property
    def centers(self) -> np.ndarray:
        ij = self.indices
        return (ij[:, 0] + 0.5) * self.pitch + 1j * (ij[:, 1] + 0.5) * self.pitch

    @property
    def boxes(self) -> list[Box]:
        return [Box(c, self.r) for c in self.centers]


def _row_ok(strip: StripSpec, y0: np.ndarray, y1: np.ndarray) -> np.ndarray:
    """Rows ``[y0, y1]`` lying in a single closed band of the strip family."""
    return strip.contains(1j * y0) & strip.contains(1j * y1) & (strip.band_index(y0) == strip.band_index(y1))


def _square_chords(host: Box, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Horizontal extent ``[a(y), b(y)]`` of the host square at heights ``y``."""
    c, s = math.cos(host.angle), math.sin(host.angle)
    h = 0.5 * host.side
    dy = y - host.center.imag
    lo = np.full(y.shape, -np.inf)
    hi = np.full(y.shape, np.inf)
    # |dx*c + dy*s| <= h and |-dx*s + dy*c| <= h.
    for a, b in ((c, dy * s), (-s, dy * c)):
        if abs(a) < 1e-15:
            bad = np.abs(b) > h
            lo[bad], hi[bad] = np.inf, -np.inf
            continue
        e1, e2 = (-h - b) / a, (h - b) / a
        lo = np.maximum(lo, np.minimum(e1, e2))
        hi = np.minimum(hi, np.maximum(e1, e2))
    return lo + host.center.real, hi + host.center.real


def intersection_area(host: Box, strip: StripSpec) -> float:
    x0, x1, y0, y1 = host.bbox()
    geom = _polygon_of(Intersection(host, strip), (x0, x1, y0, y1))
    return float(geom.area)


def build_packing(
    host: Box,
    strip: StripSpec,
    r: float,
    grid_margin: Optional[float] = None,
    c: Optional[float] = None,
) -> Packing:
    """Grid r-packing of ``host cap strip``.

    The plane is covered by a grid of pitch ``r + grid_margin`` anchored at
    the origin. A grid cell is kept iff it lies wholly in the host square
    and in one closed band of the strip family. Its concentric r-box
    joins the packing. ``density`` is measured against the host square.

    Parameters
    ----------
    grid_margin
        Grid slack ``eps``; defaults to ``r/16``.
    c
        Required ratio ``host.side / r``; defaults to ``64*max(1, 1/r)``.

    Raises
    ------
    TooCoarse
        If ``host.side < c * r``.
    """
    if not r > 0:
        raise DomainError("r must be positive")
    eps = r / 16.0 if grid_margin is None else float(grid_margin)
    if eps < 0:
        raise DomainError("grid_margin must be >= 0")
    creq = default_c(r) if c is None else float(c)
    if host.side < creq * r:
        raise TooCoarse(f"host side {host.side!r} < c*r = {creq * r!r}")
    p = r + eps
    _, _, ymin, ymax = host.bbox()
    iy = np.arange(math.floor(ymin / p), math.ceil(ymax / p) + 1, dtype=np.int64)
    y0, y1 = iy * p, (iy + 1) * p
    a0, b0 = _square_chords(host, y0)
    a1, b1 = _square_chords(host, y1)
    a, b = np.maximum(a0, a1), np.minimum(b0, b1)
    ok = _row_ok(strip, y0, y1) & (b > a)
    iy, a, b = iy[ok], a[ok], b[ok]
    # Guard against the cell edge rounding a hair outside the chord.
    safe = 1e-12 * (np.abs(a) + np.abs(b) + 1.0)
    lo = np.ceil((a + safe) / p).astype(np.int64)
    hi = np.floor((b - safe) / p).astype(np.int64)
    keep = hi > lo
    runs = np.stack([iy[keep], lo[keep], hi[keep]], axis=1) if keep.any() else np.zeros((0, 3), dtype=np.int64)
    n = int((runs[:, 2] - runs[:, 1]).sum()) if runs.size else 0
    dens = n * r * r / host.area
    qa = intersection_area(host, strip)
    dens_q = n * r * r / qa if qa > 0 else 0.0
    return Packing(float(r), p, host, strip, runs.astype(np.int64), float(dens), float(dens_q))


def packing_bound(delta: float, delta_prime: float) -> float:
    """Target density ``1/2 - delta/pi - delta'`` for strip packings."""
    return 0.5 - delta / math.pi - delta_prime


def compliant_instances(n: int, seed: int, r_range=(0.05, 0.1), side_range=(1.0, 1.5), span=100.0):
    """Random hosts ``(host, r)`` meeting the default size condition.

    Host sides are ``c(r)*r`` times a factor drawn from ``side_range``.
    Centres are uniform in ``[-span, span]**2`` and angles in ``[0, 2*pi)``.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        r = float(rng.uniform(*r_range))
        side = default_c(r) * r * float(rng.uniform(*side_range))
        center = complex(rng.uniform(-span, span), rng.uniform(-span, span))
        out.append((Box(center, side, float(rng.uniform(0.0, 2.0 * math.pi))), r))
    return out


def koebe_derivative_bounds(r: float, dist: float, deriv_at_center: float) -> tuple[float, float]:
    """Bounds on ``|f'(z)|`` at distance ``dist`` from the centre of a univalent disc of radius ``r``."""
    if not (0 <= dist < r):
        raise DomainError(f"need 0 <= dist < r, got dist={dist!r}, r={r!r}")
    k = r * r * deriv_at_center
    return k * (r - dist) / (r + dist) ** 3, k * (r + dist) / (r - dist) ** 3


def koebe_displacement_bounds(r: float, dist: float, deriv_at_center: float) -> tuple[float, float]:
    """Bounds on ``|f(z) - f(z0)|`` at distance ``dist`` from ``z0``."""
    if not (0 <= dist < r):
        raise DomainError(f"need 0 <= dist < r, got dist={dist!r}, r={r!r}")
    k = r * r * deriv_at_center * dist
    return k / (r + dist) ** 2, k / (r - dist) ** 2


def distortion_bound_single(K: float) -> float:
    """Distortion bound on ``D(z0, r)`` for maps univalent on ``D(z0, K*r)``."""
    if not K > 3:
        raise DomainError("K must exceed 3")
    return ((K + 1.0) / (K - 3.0)) ** 6


def distortion_bound_composite(K: float) -> float:
    """Uniform distortion bound for inverse branches of long compositions."""
    if not K > 3:
        raise DomainError("K must exceed 3")
    return ((K + 1.0) / (K - 3.0)) ** 12


@dataclass(frozen=True)
class DistortionEstimate:
    c_f: float
    C_f: float
    D: float
    sample_pairs: int


def empirical_distortion(map_samples, max_pairs: Optional[int] = None, seed: int = 0) -> DistortionEstimate:
    """Extreme difference quotients over pairs of samples ``(z, f(z))``.

    All pairs are used when there are at most ``max_pairs`` of them (or
    ``max_pairs`` is None). Otherwise ``max_pairs`` pairs are drawn with a
    seeded generator.
    """
    arr = np.asarray(map_samples, dtype=complex)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DomainError("map_samples must be a sequence of (z, f(z)) pairs")
    z, fz = arr[:, 0], arr[:, 1]
    n = z.size
    total = n * (n - 1) // 2
    if max_pairs is None or total <= max_pairs:
        i, j = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, size=max_pairs)
        j = (i + rng.integers(1, n, size=max_pairs)) % n
    dz = np.abs(z[i] - z[j])
    ok = dz > 0
    if not ok.any():
        raise DegenerateInput("all sample points coincide")
    q = np.abs(fz[i] - fz[j])[ok] / dz[ok]
    lo, hi = float(q.min()), float(q.max())
    if not lo > 0:
        raise DegenerateInput("map is not injective on the samples")
    return DistortionEstimate(lo, hi, hi / lo, int(ok.sum()))


def image_square_sandwich(
    center_image: complex,
    deriv_mod: float,
    deriv_arg: float,
    r: float,
    d: float,
    eps: float,
    theta: float = 0.0,
) -> tuple[Box, Box]:
    """Squares ``inner <= f(Q) <= outer`` for ``Q = Q(z0, r, theta)`` under a map of distortion ``d``."""
    if not d >= 1:
        raise DomainError("distortion d must be >= 1")
    if not (0 < eps < 1 / SQRT2):
        raise DomainError("eps must lie in (0, 1/sqrt(2))")
    if not (r > 0 and deriv_mod > 0):
        raise DomainError("r and deriv_mod must be positive")
    ang = theta + deriv_arg
    inner = Box(center_image, deriv_mod * r * (1.0 - SQRT2 * eps) / d, ang)
    outer = Box(center_image, deriv_mod * r * d * (1.0 + SQRT2 * eps), ang)
    return inner, outer
