"""Nested families of iterated preimages of strip packings.

Level 0 is a single seed r-box ``B``. Each level-k cell is an r-box ``Q``
in the coordinates of the k-th image. Its children are the grid r-boxes
packed into ``E(Q) cap J_delta``, where ``E(Q)`` is an annular sector held
exactly rather than through a sandwich square. A level-k cell names the
set of seed points ``z`` with ``E^j(z)`` in the j-th ancestor box for
every ``j <= k``. That set is materialised on demand by pulling points
back through the ancestors with the inverse branch matching each
ancestor's band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._parallel import ordered_map
from .dynamics import (
    OVERFLOW_RE,
    CODE_ESCAPING,
    ExpMap,
    StripSpec,
    apply_array,
    classify_points,
    inverse_branch_near,
    repelling_fixed_point,
)
from .errors import BudgetError, DepthOverflow, DomainError, EmptyPacking
from .geometry import SQRT2, Box
from .koenigs import GaugeFunction, tower_gauge

_KEY_OFFSET = 1 << 30


def _keys(ix: np.ndarray, iy: np.ndarray) -> np.ndarray:
    return (iy.astype(np.int64) + _KEY_OFFSET) * (1 << 31) + (ix.astype(np.int64) + _KEY_OFFSET)


@dataclass(frozen=True)
class Level:
    """Cells of one level.

    ``centers`` are image-coordinate box centres. ``parent[i]`` indexes the
    previous level and ``grid[i] = (ix, iy)`` is the packing grid cell
    (``None`` for the seed level). Cells are grouped by parent and ordered
    by ``(iy, ix)`` inside each group.
    """

    centers: np.ndarray
    parent: np.ndarray
    grid: Optional[np.ndarray]
    image_density: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return int(self.centers.size)


def _sector(m: ExpMap, c: complex, r: float):
    """Radii and angles of ``E(Q(c, r, 0))``."""
    loglam = math.log(abs(m.lam))
    lo, hi = c.real - 0.5 * r + loglam, c.real + 0.5 * r + loglam
    if hi > OVERFLOW_RE:
        raise DepthOverflow(f"image radius exp({hi:.1f}) exceeds the double range")
    phi0 = c.imag - 0.5 * r + m.arg_lambda
    return math.exp(lo), math.exp(hi), phi0, phi0 + r


def sector_area(rho0: float, rho1: float, width: float) -> float:
    return 0.5 * (rho1 * rho1 - rho0 * rho0) * width


def _sector_bbox(rho0, rho1, phi0, phi1):
    pts = [rho * complex(math.cos(p), math.sin(p)) for rho in (rho0, rho1) for p in (phi0, phi1)]
    k0, k1 = math.ceil(phi0 / (math.pi / 2)), math.floor(phi1 / (math.pi / 2))
    for k in range(k0, k1 + 1):
        a = k * math.pi / 2
        pts.append(rho1 * complex(math.cos(a), math.sin(a)))
    xs = [p.real for p in pts]
    ys = [p.imag for p in pts]
    return min(xs), max(xs), min(ys), max(ys)


def pack_sector(rho0, rho1, phi0, phi1, strip: StripSpec, p: float) -> np.ndarray:
    """Grid cells of pitch ``p`` inside the sector and one strip band.

    Returns an ``(n, 2)`` array of ``(ix, iy)`` sorted by ``(iy, ix)``. A cell
    is kept iff its four corners lie in the disc of radius ``rho1`` and the
    wedge ``[phi0, phi1]`` (width below pi), its nearest point to the
    origin lies at distance ``>= rho0``, and its row lies in a single band.
    """
    if not 0 < phi1 - phi0 < math.pi:
        raise DomainError("sector width must lie in (0, pi)")
    x0, x1, y0, y1 = _sector_bbox(rho0, rho1, phi0, phi1)
    iy = np.arange(math.floor(y0 / p), math.floor(y1 / p) + 1, dtype=np.int64)
    ylo, yhi = iy * p, (iy + 1) * p
    rows = strip.contains(1j * ylo) & strip.contains(1j * yhi) & (strip.band_index(ylo) == strip.band_index(yhi))
    iy = iy[rows]
    ix = np.arange(math.floor(x0 / p), math.floor(x1 / p) + 1, dtype=np.int64)
    if iy.size == 0 or ix.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    IY, IX = np.meshgrid(iy, ix, indexing="ij")
    IX, IY = IX.ravel(), IY.ravel()
    cx0, cx1 = IX * p, (IX + 1) * p
    cy0, cy1 = IY * p, (IY + 1) * p
    u0 = (math.cos(phi0), math.sin(phi0))
    u1 = (math.cos(phi1), math.sin(phi1))
    ok = np.ones(IX.size, dtype=bool)
    r2 = rho1 * rho1
    for x in (cx0, cx1):
        for y in (cy0, cy1):
            ok &= x * x + y * y <= r2
            ok &= u0[0] * y - u0[1] * x >= 0.0
            ok &= x * u1[1] - y * u1[0] >= 0.0
    nx = np.clip(0.0, cx0, cx1)
    ny = np.clip(0.0, cy0, cy1)
    ok &= nx * nx + ny * ny >= rho0 * rho0
    return np.stack([IX[ok], IY[ok]], axis=1)


@dataclass
class NestedFamily:
    map: ExpMap
    strip: StripSpec
    seed: Box
    r: float
    pitch: float
    levels: list[Level]
    d: list[float] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def n_cells(self, k: int) -> int:
        return len(self.levels[k])

    def image_box(self, k: int, i: int) -> Box:
        return Box(complex(self.levels[k].centers[i]), self.r)

    def _starts(self, k: int) -> np.ndarray:
        """Index of each cell's first sibling."""
        par = self.levels[k].parent
        first = np.searchsorted(par, par, side="left")
        return first

    def address(self, k: int, i: int) -> tuple[int, ...]:
        out = []
        for j in range(k, 0, -1):
            par = self.levels[j].parent
            first = int(np.searchsorted(par, par[i], side="left"))
            out.append(i - first)
            i = int(par[i])
        return tuple(reversed(out))

    def addresses(self, k: int) -> list[tuple[int, ...]]:
        local = [np.arange(len(self.levels[j])) - self._starts(j) for j in range(1, k + 1)]
        out = []
        for i in range(len(self.levels[k])):
            a, c = [], i
            for j in range(k, 0, -1):
                a.append(int(local[j - 1][c]))
                c = int(self.levels[j].parent[c])
            out.append(tuple(reversed(a)))
        return out

    def index_of(self, address: Sequence[int]) -> tuple[int, int]:
        """``(level, index)`` of the cell with the given address."""
        i = 0
        for j, a in enumerate(address, start=1):
            par = self.levels[j].parent
            lo = int(np.searchsorted(par, i, side="left"))
            hi = int(np.searchsorted(par, i, side="right"))
            if not 0 <= a < hi - lo:
                raise DomainError(f"address {tuple(address)} leaves the family at level {j}")
            i = lo + int(a)
        return len(address), i

    def pullback(self, k: int, points, cells, with_log_jacobian: bool = False):
        """Pull image points at level ``k`` back to seed coordinates.

        ``cells[i]`` is the level-k cell whose box holds ``points[i]``. The
        log-Jacobian returned on request is ``sum_j log|E^j(z)|`` over
        ``j = 1..k``, i.e. ``log|(E^k)'(z)|``.
        """
        w = np.array(points, dtype=complex, copy=True)
        cell = np.asarray(cells, dtype=np.int64).copy()
        logj = np.zeros(w.shape)
        for j in range(k, 0, -1):
            if with_log_jacobian:
                logj += np.log(np.abs(w))
            cell = self.levels[j].parent[cell]
            ref = self.levels[j - 1].centers[cell].imag
            w = inverse_branch_near(self.map, w, ref)
        return (w, logj) if with_log_jacobian else w

    def materialize(self, k: int, i: int, points=None) -> np.ndarray:
        """Seed-coordinate images of ``points`` (default: the box centre) of cell ``(k, i)``."""
        pts = np.atleast_1d(np.asarray(self.levels[k].centers[i] if points is None else points, dtype=complex))
        return self.pullback(k, pts, np.full(pts.shape, i))

    def materialized_centers(self, k: int) -> np.ndarray:
        lv = self.levels[k]
        return self.pullback(k, lv.centers, np.arange(len(lv)))

    def export_lines(self) -> list[str]:
        """One CSV record per cell: level, dotted address, image centre and side."""
        lines = ["level,address,center_re,center_im,side"]
        for k in range(self.depth + 1):
            c = self.levels[k].centers
            for i, a in enumerate(self.addresses(k)):
                addr = ".".join(str(v) for v in a) if a else "-"
                lines.append(f"{k},{addr},{float(c[i].real)!r},{float(c[i].imag)!r},{self.r!r}")
        return lines


def _min_modulus(c: np.ndarray, r: float) -> np.ndarray:
    h = 0.5 * r
    x = np.clip(0.0, c.real - h, c.real + h)
    y = np.clip(0.0, c.imag - h, c.imag + h)
    return np.hypot(x, y)


def _max_modulus(c: np.ndarray, r: float) -> np.ndarray:
    h = 0.5 * r
    return np.hypot(np.abs(c.real) + h, np.abs(c.imag) + h)


def diameter_bounds(nf: NestedFamily) -> list[float]:
    """Mean-value diameter bounds ``d_k``.

    A level-k cell is the image of a convex r-box under the inverse of
    ``E^k``, whose derivative is ``1/prod_j |E^j|``. So its diameter is at
    most ``r*sqrt(2) / prod_j min|B_j|`` over its ancestor boxes ``B_j``.
    """
    out = [SQRT2 * nf.r]
    for k in range(1, nf.depth + 1):
        cell = np.arange(nf.n_cells(k))
        logmin = np.zeros(cell.size)
        for j in range(k, 0, -1):
            logmin += np.log(_min_modulus(nf.levels[j].centers[cell], nf.r))
            cell = nf.levels[j].parent[cell]
        out.append(float(SQRT2 * nf.r * np.exp(-logmin.min())))
    return out


def construct(
    m: ExpMap,
    strip: StripSpec,
    seed: Box,
    r: float,
    depth: int,
    grid_margin: Optional[float] = None,
    x2: Optional[float] = None,
    depth_max: int = 3,
    max_cells: int = 2_000_000,
    threads: Optional[int] = None,
) -> NestedFamily:
    """Build the nested family down to ``depth``.

    Parameters
    ----------
    seed
        Axis-aligned box of side ``r`` inside ``strip``.
    grid_margin
        Packing grid slack; defaults to ``r/64``.
    x2
        Optional lower bound on ``Re seed.center``.
    max_cells
        Budget on the estimated number of cells per level.

    Raises
    ------
    DomainError
        Bad seed, strip or depth.
    DepthOverflow
        An image sector leaves the double range.
    BudgetError
        A level would exceed ``max_cells``.
    EmptyPacking
        Some cell receives no children.
    """
    if not 0 <= depth <= depth_max:
        raise DomainError(f"depth must lie in [0, {depth_max}]")
    if not 0 < r < math.pi / 2:
        raise DomainError("r must lie in (0, pi/2)")
    if not seed.is_r_box(r):
        raise DomainError("seed must be an axis-aligned box of side r")
    if abs(strip.arg_lambda - m.arg_lambda) > 1e-12:
        raise DomainError("strip.arg_lambda must match the map")
    if not bool(np.all(strip.contains(seed.corners()))):
        raise DomainError("seed must lie in the strip family")
    if x2 is not None and seed.center.real < x2:
        raise DomainError(f"seed centre real part below x2={x2!r}")
    eps = r / 64.0 if grid_margin is None else float(grid_margin)
    if eps < 0:
        raise DomainError("grid_margin must be >= 0")
    p = r + eps
    levels = [Level(np.array([seed.center]), np.zeros(1, dtype=np.int64), None)]
    for _ in range(depth):
        cur = levels[-1]
        sectors = [_sector(m, complex(c), r) for c in cur.centers]
        est = sum(sector_area(s[0], s[1], r) for s in sectors) / (p * p)
        if est > max_cells:
            raise BudgetError(f"next level needs about {est:.3g} cells (budget {max_cells})")
        kids = ordered_map(lambda s: pack_sector(*s, strip, p), sectors, threads)
        counts = np.array([k.shape[0] for k in kids], dtype=np.int64)
        if (counts == 0).any():
            raise EmptyPacking(f"{int((counts == 0).sum())} cells received no children")
        dens = counts * (r * r) / np.array([sector_area(s[0], s[1], r) for s in sectors])
        levels[-1] = Level(cur.centers, cur.parent, cur.grid, dens)
        grid = np.concatenate(kids)
        centers = (grid[:, 0] + 0.5) * p + 1j * (grid[:, 1] + 0.5) * p
        parent = np.repeat(np.arange(len(cur), dtype=np.int64), counts)
        levels.append(Level(centers, parent, grid))
    nf = NestedFamily(m, strip, seed, float(r), p, levels)
    nf.d = diameter_bounds(nf)
    return nf


@dataclass(frozen=True)
class NestingReport:
    containment_violations: int
    diameter_violations: int
    measured_diameters: tuple[float, ...]
    d: tuple[float, ...]
    d_decreasing: bool
    sampled_density_min: tuple[float, ...]
    sampled_density_mean: tuple[float, ...]
    delta_certificate: tuple[float, ...]
    escaping: int
    non_escaping: int

    @property
    def ok(self) -> bool:
        return (
            self.containment_violations == 0
            and self.diameter_violations == 0
            and self.d_decreasing
            and all(v > 0 for v in self.delta_certificate)
            and self.non_escaping == 0
        )


def _log_jacobian(nf: NestedFamily, k: int, cells: np.ndarray) -> np.ndarray:
    """``log|(E^k)'|`` at the materialised centres of ``cells``."""
    lv = nf.levels[k]
    _, lj = nf.pullback(k, lv.centers[cells], cells, with_log_jacobian=True)
    return lj


def _delta_certificate(nf: NestedFamily, k: int) -> float:
    """Rigorous lower bound on ``dens(A_{k+1}, F)`` over level-k cells.

    The image density of the children in ``E(Q)`` is divided by the
    squared ratio of the sup and inf of ``|(E^{k+1})'|`` over the cell.
    """
    lv = nf.levels[k]
    cell = np.arange(len(lv))
    logratio = np.full(cell.size, nf.r)
    for j in range(k, 0, -1):
        c = nf.levels[j].centers[cell]
        logratio += np.log(_max_modulus(c, nf.r)) - np.log(_min_modulus(c, nf.r))
        cell = nf.levels[j].parent[cell]
    return float((lv.image_density * np.exp(-2.0 * logratio)).min())


def _sampled_density(nf: NestedFamily, k: int, i: int, m: int, seed: int) -> float:
    lv, nxt = nf.levels[k], nf.levels[k + 1]
    rng = np.random.default_rng([seed, k, i])
    g = (np.arange(m) + 0.5) / m - 0.5
    U, V = np.meshgrid(g, g, indexing="xy")
    jit = (rng.random((2, m * m)) - 0.5) / m
    w = complex(lv.centers[i]) + nf.r * ((U.ravel() + jit[0]) + 1j * (V.ravel() + jit[1]))
    _, lj = nf.pullback(k, w, np.full(w.size, i), with_log_jacobian=True)
    weight = np.exp(-2.0 * (lj - lj.min()))
    fw = apply_array(nf.map, w)
    lo = int(np.searchsorted(nxt.parent, i, side="left"))
    hi = int(np.searchsorted(nxt.parent, i, side="right"))
    kg = nxt.grid[lo:hi]
    keys = _keys(kg[:, 0], kg[:, 1])
    order = np.argsort(keys)
    keys = keys[order]
    p = nf.pitch
    ix = np.floor(fw.real / p).astype(np.int64)
    iy = np.floor(fw.imag / p).astype(np.int64)
    q = _keys(ix, iy)
    pos = np.clip(np.searchsorted(keys, q), 0, keys.size - 1)
    hit = keys[pos] == q
    cc = nxt.centers[lo:hi][order][pos]
    h = 0.5 * nf.r
    hit &= (np.abs(fw.real - cc.real) <= h) & (np.abs(fw.imag - cc.imag) <= h)
    return float(weight[hit].sum() / weight.sum())


def verify_nesting(
    nf: NestedFamily,
    density_samples: int = 256,
    seed: int = 0,
    per_edge: int = 4,
    tol: float = 1e-9,
    max_steps: int = 200,
) -> NestingReport:
    """Check containment, diameter and density conditions of the family.

    Boundary samples of every cell are pulled back to the seed and pushed
    forward again. Each forward image must stay in the matching ancestor
    box. Measured diameters come from the same samples. Densities are
    Jacobian-weighted stratified samples. Deepest-level centres are
    classified with the default escape threshold.
    """
    if nf.depth < 1:
        raise DomainError("verification needs depth >= 1")
    r = nf.r
    base = Box(0j, r).boundary(per_edge)
    nb = base.size
    violations = 0
    diam_viol = 0
    measured = [SQRT2 * r]
    for k in range(1, nf.depth + 1):
        lv = nf.levels[k]
        n = len(lv)
        pts = (lv.centers[:, None] + base[None, :]).ravel()
        cells = np.repeat(np.arange(n), nb)
        z = nf.pullback(k, pts, cells)
        # forward check against every ancestor box
        bad = np.zeros(n, dtype=bool)
        chain = [np.arange(n)]
        for j in range(k, 0, -1):
            chain.append(nf.levels[j].parent[chain[-1]])
        chain = chain[::-1]
        w = z
        for j in range(0, k + 1):
            c = nf.levels[j].centers[chain[j]]
            cc = np.repeat(c, nb)
            slack = 0.5 * r + tol * np.maximum(1.0, np.abs(cc))
            inside = (np.abs(w.real - cc.real) <= slack) & (np.abs(w.imag - cc.imag) <= slack)
            bad |= ~inside.reshape(n, nb).all(axis=1)
            if j < k:
                w = apply_array(nf.map, w)
        violations += int(bad.sum())
        zz = z.reshape(n, nb)
        diam = np.abs(zz[:, :, None] - zz[:, None, :]).max(axis=(1, 2))
        diam_viol += int((diam > nf.d[k] * (1 + 1e-9)).sum())
        measured.append(float(diam.max()))
    m = max(1, int(math.ceil(math.sqrt(density_samples))))
    dmin, dmean, cert = [], [], []
    for k in range(nf.depth):
        vals = np.array([_sampled_density(nf, k, i, m, seed) for i in range(nf.n_cells(k))])
        dmin.append(float(vals.min()))
        dmean.append(float(vals.mean()))
        cert.append(_delta_certificate(nf, k))
    deep = nf.materialized_centers(nf.depth)
    codes, _ = classify_points(nf.map, deep, max_steps=max_steps)
    esc = int((codes == CODE_ESCAPING).sum())
    d = tuple(nf.d)
    return NestingReport(
        containment_violations=violations,
        diameter_violations=diam_viol,
        measured_diameters=tuple(measured),
        d=d,
        d_decreasing=all(a > b for a, b in zip(d, d[1:])),
        sampled_density_min=tuple(dmin),
        sampled_density_mean=tuple(dmean),
        delta_certificate=tuple(cert),
        escaping=esc,
        non_escaping=int(codes.size - esc),
    )


@dataclass(frozen=True)
class FrostmanMass:
    """Masses ``tau_k`` per level, aligned with the family's cell order."""

    levels: tuple[np.ndarray, ...]
    family: NestedFamily = field(repr=False)

    def total(self, k: int) -> float:
        return math.fsum(self.levels[k])

    @property
    def masses(self) -> dict[tuple[int, ...], float]:
        out = {}
        for k, tau in enumerate(self.levels):
            for a, v in zip(self.family.addresses(k), tau):
                out[a] = float(v)
        return out

    def conservation_residual(self) -> float:
        """Largest ``|sum(children) - parent|`` over the family."""
        worst = 0.0
        for k in range(1, len(self.levels)):
            par = self.family.levels[k].parent
            tau = self.levels[k]
            bounds = np.flatnonzero(np.r_[True, par[1:] != par[:-1], True])
            for a, b in zip(bounds[:-1], bounds[1:]):
                worst = max(worst, abs(math.fsum(tau[a:b]) - self.levels[k - 1][par[a]]))
        return worst


def frostman_mass(nf: NestedFamily) -> FrostmanMass:
    """Split each parent's mass among its children in proportion to their areas.

    A level-k cell has area about ``r**2 / |(E^k)'(centre)|**2``.
    """
    taus = [np.ones(1)]
    for k in range(1, nf.depth + 1):
        lv = nf.levels[k]
        n = len(lv)
        loga = -2.0 * _log_jacobian(nf, k, np.arange(n))
        tau = np.empty(n)
        par = lv.parent
        bounds = np.flatnonzero(np.r_[True, par[1:] != par[:-1], True])
        prev = taus[-1]
        for a, b in zip(bounds[:-1], bounds[1:]):
            wts = np.exp(loga[a:b] - loga[a:b].max())
            tau[a:b] = prev[par[a]] * (wts / math.fsum(wts))
        taus.append(tau)
    return FrostmanMass(tuple(taus), nf)


@dataclass(frozen=True)
class MassRatioScan:
    max_ratio: float
    argmax_point: complex
    argmax_radius: float
    radii: tuple[float, ...]
    ratios: np.ndarray = field(repr=False)


def _deep_geometry(nf: NestedFamily):
    k = nf.depth
    c = nf.materialized_centers(k)
    # Half of the diameter bound encloses each cell from its centre.
    half = np.full(c.size, 0.5 * nf.d[k]) if k > 0 else np.full(1, 0.5 * SQRT2 * nf.r)
    return c, half


def ball_mass(nf: NestedFamily, mass: FrostmanMass, z: complex, radius: float) -> float:
    """Mass of the deepest cells meeting ``D(z, radius)`` (via enclosing discs)."""
    c, half = _deep_geometry(nf)
    meet = np.abs(c - z) <= radius + half
    return math.fsum(mass.levels[nf.depth][meet])


def mass_ratio_scan(
    nf: NestedFamily,
    mass: FrostmanMass,
    gauge: GaugeFunction,
    probes: int = 32,
    n_radii: int = 12,
    seed: int = 0,
) -> MassRatioScan:
    """Largest ``mu(D(z, rho)) / h(rho)`` over sampled deep centres and radii.

    Radii are log-spaced from the deepest diameter bound up to the seed
    diameter, capped at ``gauge.t_max``.
    """
    c, half = _deep_geometry(nf)
    tau = mass.levels[nf.depth]
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(c.size, size=min(probes, c.size), replace=False))
    hi = min(SQRT2 * nf.r, gauge.t_max)
    lo = min(nf.d[-1], hi)
    radii = np.geomspace(lo, hi, n_radii) if hi > lo else np.array([hi])
    hval = np.array([gauge(float(t)) for t in radii])
    ratios = np.empty((pick.size, radii.size))
    for a, i in enumerate(pick):
        dist = np.abs(c - c[i])
        for b, rho in enumerate(radii):
            ratios[a, b] = math.fsum(tau[dist <= rho + half]) / hval[b]
    a, b = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
    return MassRatioScan(
        float(ratios[a, b]), complex(c[pick[a]]), float(radii[b]), tuple(float(v) for v in radii), ratios
    )


def density_factor(eps: float) -> float:
    """Asymptotic per-level density ``(1/2 - eps) / (1 + eps)**2``."""
    if not 0 < eps < 0.5:
        raise DomainError("eps must lie in (0, 1/2)")
    return (0.5 - eps) / (1.0 + eps) ** 2


def divergence_slope(beta: float, gamma: float, eps: float) -> float:
    """Per-level increment ``gamma*log(beta) + log((1/2 - eps)/(1 + eps)**2)``."""
    return gamma * math.log(beta) + math.log(density_factor(eps))


def breakpoint_gamma(beta: float, eps: float) -> float:
    """Exponent where the divergence slope vanishes; tends to ``log 2 / log beta``."""
    return -math.log(density_factor(eps)) / math.log(beta)


def divergence_product(lambda_prime: float, gamma: float, eps: float, k_max: int) -> np.ndarray:
    """``log P_k = log g(d_k) + sum log Delta_j`` for ``k = 0..k_max``.

    Uses ``g(d_k) = (beta**k * Phi(2*beta))**gamma`` in tower form, so
    nothing overflows.
    """
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    if not 0 <= k_max <= 1000:
        raise DomainError("k_max must lie in [0, 1000]")
    logd = math.log(density_factor(eps))
    beta = repelling_fixed_point(lambda_prime)
    foot = tower_gauge(lambda_prime, gamma, 0, 2.0 * beta)
    base = gamma * math.log(foot.base)
    step = gamma * math.log(beta) + logd
    return base + step * np.arange(k_max + 1, dtype=float)
