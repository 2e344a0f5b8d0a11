"""Gauged box counting over grid classifications of the plane."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional, Sequence

import numpy as np

from .dynamics import (
    CODE_ATTRACTED,
    CODE_ESCAPING,
    CODE_UNDECIDED,
    ExpMap,
    apply,
    classify_points,
    repelling_fixed_point,
)
from .errors import BudgetError, DomainError
from .geometry import SQRT2, Box
from .koenigs import GaugeFunction

DEFAULT_CELL_CAP = 10 ** 8
SAMPLE_MODES = ("center", "five")


class Label(IntEnum):
    UNDECIDED = CODE_UNDECIDED
    FATOU = CODE_ATTRACTED
    JULIA = CODE_ESCAPING


@dataclass(frozen=True)
class GridClassification:
    """Labels of the ``n x n`` grid of squares of side ``resolution``.

    The grid starts at the lower-left corner of ``region``. ``labels[iy, ix]``
    holds a :class:`Label` code. ``evaluations`` counts orbit evaluations
    spent producing this grid, excluding work inherited from a parent grid.
    """

    map: ExpMap
    region: Box
    resolution: float
    n: int
    labels: np.ndarray = field(repr=False)
    params: dict
    evaluations: int

    @property
    def non_fatou_count(self) -> int:
        return int(np.count_nonzero(self.labels != Label.FATOU))

    def counts(self) -> dict[str, int]:
        return {lab.name: int(np.count_nonzero(self.labels == lab)) for lab in Label}

    @property
    def origin(self) -> complex:
        h = 0.5 * self.region.side
        return self.region.center - complex(h, h)

    def cell_box(self, ix: int, iy: int) -> Box:
        o = self.origin
        res = self.resolution
        return Box(o + complex((ix + 0.5) * res, (iy + 0.5) * res), res)


def _join_five(center: np.ndarray, corners: np.ndarray) -> np.ndarray:
    """Fatou iff all five points are attracted; Julia-candidate iff any escapes."""
    allc = np.concatenate([center[:, None], corners], axis=1)
    out = np.full(center.shape, Label.UNDECIDED, dtype=np.uint8)
    out[(allc == CODE_ESCAPING).any(axis=1)] = Label.JULIA
    out[(allc == CODE_ATTRACTED).all(axis=1)] = Label.FATOU
    return out


def _classify_cells(m, origin, res, ix, iy, mode, max_steps, escape_re, threads):
    """Labels for the listed cells and the number of orbits evaluated."""
    x0, y0 = origin.real, origin.imag
    cz = (x0 + (ix + 0.5) * res) + 1j * (y0 + (iy + 0.5) * res)
    if mode == "center":
        codes, _ = classify_points(m, cz, max_steps, escape_re, threads)
        return np.asarray(codes, dtype=np.uint8), int(cz.size)
    # Corner lattice points are shared by neighbours; evaluate each once.
    offs = ((0, 0), (1, 0), (0, 1), (1, 1))
    kx = np.concatenate([ix + dx for dx, _ in offs])
    ky = np.concatenate([iy + dy for _, dy in offs])
    keys = ky.astype(np.int64) * (1 << 31) + kx.astype(np.int64)
    uniq, inv = np.unique(keys, return_inverse=True)
    ux, uy = uniq % (1 << 31), uniq // (1 << 31)
    pts = np.concatenate([cz, (x0 + ux * res) + 1j * (y0 + uy * res)])
    codes, _ = classify_points(m, pts, max_steps, escape_re, threads)
    cc = codes[: cz.size]
    corner = codes[cz.size:][inv].reshape(4, cz.size).T
    return _join_five(cc, corner), int(pts.size)


def _check_params(m: ExpMap, region: Box, resolution: float, sample_mode: str):
    m._require_real()
    if region.angle != 0.0:
        raise DomainError("classification regions must be axis-aligned")
    if not resolution > 0:
        raise DomainError("resolution must be positive")
    if sample_mode not in SAMPLE_MODES:
        raise DomainError(f"sample_mode must be one of {SAMPLE_MODES}")


def classify_grid(
    m: ExpMap,
    region: Box,
    resolution: float,
    max_steps: int = 200,
    sample_mode: str = "center",
    escape_re: Optional[float] = None,
    cell_cap: int = DEFAULT_CELL_CAP,
    threads: Optional[int] = None,
) -> GridClassification:
    """Label every grid square as Fatou, Julia-candidate or undecided.

    ``sample_mode="center"`` classifies the square's centre. ``"five"`` adds
    the four corners. The square is Fatou only if all five are attracted.
    """
    _check_params(m, region, resolution, sample_mode)
    n = max(1, int(math.ceil(region.side / resolution - 1e-9)))
    if n * n > cell_cap:
        raise BudgetError(f"{n * n} cells exceed the cap {cell_cap}")
    esc = m.default_escape_re if escape_re is None else float(escape_re)
    iy, ix = np.divmod(np.arange(n * n, dtype=np.int64), n)
    h = 0.5 * region.side
    origin = region.center - complex(h, h)
    labels, evals = _classify_cells(m, origin, resolution, ix, iy, sample_mode, max_steps, esc, threads)
    params = {"max_steps": int(max_steps), "escape_re": esc, "sample_mode": sample_mode, "cell_cap": int(cell_cap)}
    return GridClassification(m, region, float(resolution), n, labels.reshape(n, n), params, evals)


def refine(
    cls: GridClassification,
    factor: int = 2,
    max_steps: Optional[int] = None,
    threads: Optional[int] = None,
) -> GridClassification:
    """Split every square into ``factor**2`` children and relabel.

    Children of Fatou squares inherit the label without new orbit work.
    All other children are classified afresh.
    """
    if factor < 2:
        raise DomainError("refinement factor must be >= 2")
    n2 = cls.n * factor
    cap = cls.params.get("cell_cap", DEFAULT_CELL_CAP)
    if n2 * n2 > cap:
        raise BudgetError(f"{n2 * n2} cells exceed the cap {cap}")
    params = dict(cls.params)
    if max_steps is not None:
        params["max_steps"] = int(max_steps)
    res = cls.resolution / factor
    labels = np.repeat(np.repeat(cls.labels, factor, axis=0), factor, axis=1)
    iy, ix = np.nonzero(labels != Label.FATOU)
    evals = 0
    if iy.size:
        new, evals = _classify_cells(
            cls.map, cls.origin, res, ix.astype(np.int64), iy.astype(np.int64),
            params["sample_mode"], params["max_steps"], params["escape_re"], threads,
        )
        labels[iy, ix] = new
    return GridClassification(cls.map, cls.region, res, n2, labels, params, evals)


def gauged_sum(cls: GridClassification, gauge: GaugeFunction) -> float:
    """``(non-Fatou count) * h(sqrt(2) * resolution)``."""
    t = SQRT2 * cls.resolution
    if t > gauge.t_max:
        raise DomainError(f"box diameter {t!r} exceeds the gauge domain (0, {gauge.t_max!r}]")
    return cls.non_fatou_count * gauge(t)


class Trend(Enum):
    INCREASING = "Increasing"
    DECREASING = "Decreasing"
    FLAT = "Flat"
    MIXED = "Mixed"


TREND_THRESHOLD = 0.05


def fit_trend(log_values: Sequence[float], threshold: float = TREND_THRESHOLD) -> tuple[float, Trend]:
    """Least-squares slope of ``log_values`` against their index, and its trend label.

    Increasing above ``+threshold``, decreasing below ``-threshold``.
    Otherwise the run is mixed when single steps move past the
    threshold both ways, and flat when they do not.
    """
    y = np.asarray(log_values, dtype=float)
    if y.size < 2:
        raise DomainError("need at least two values to fit a trend")
    if np.isneginf(y).any():
        return -math.inf, Trend.DECREASING
    x = np.arange(y.size, dtype=float)
    slope = float(np.polyfit(x, y, 1)[0])
    if slope > threshold:
        return slope, Trend.INCREASING
    if slope < -threshold:
        return slope, Trend.DECREASING
    dy = np.diff(y)
    if (dy > threshold).any() and (dy < -threshold).any():
        return slope, Trend.MIXED
    return slope, Trend.FLAT


@dataclass(frozen=True)
class DichotomyReport:
    gamma: float
    resolutions: tuple[float, ...]
    counts: tuple[int, ...]
    gauged_sums: tuple[float, ...]
    slope: float
    trend: Trend
    tail: int

    def to_csv(self) -> str:
        rows = ["level,resolution,non_fatou_count,gauged_sum,trend"]
        for i, (res, c, s) in enumerate(zip(self.resolutions, self.counts, self.gauged_sums)):
            rows.append(f"{i},{res!r},{c},{s!r},{self.trend.value}")
        return "\n".join(rows) + "\n"


def coarsest_resolution(side: float, gauge_t_max: float) -> float:
    """Largest ``side / n`` whose box diameter stays inside the gauge domain."""
    return side / math.ceil(side * SQRT2 / gauge_t_max * (1 + 1e-12))


def classification_ladder(
    m: ExpMap,
    region: Box,
    resolution: float,
    levels: int,
    factor: int = 2,
    max_steps: int = 200,
    sample_mode: str = "five",
    escape_re: Optional[float] = None,
    threads: Optional[int] = None,
) -> list[GridClassification]:
    ladder = [classify_grid(m, region, resolution, max_steps, sample_mode, escape_re, threads=threads)]
    for _ in range(levels - 1):
        ladder.append(refine(ladder[-1], factor, threads=threads))
    return ladder


def dichotomy_probe(
    m: ExpMap,
    lambda0: float,
    gamma_list: Sequence[float],
    region: Box,
    levels: int = 6,
    resolution: Optional[float] = None,
    factor: int = 2,
    max_steps: int = 200,
    sample_mode: str = "five",
    escape_re: Optional[float] = None,
    threads: Optional[int] = None,
) -> list[DichotomyReport]:
    """Gauged sums along a refinement ladder, one report per gauge exponent.

    The gauge uses ``Phi`` of ``lambda0``. The first resolution defaults to
    the coarsest grid whose box diameters fit in the gauge domain. Each
    trend is fitted over the last ``max(3, levels - 2)`` levels.
    """
    if not 2 <= levels <= 8:
        raise DomainError("levels must lie in [2, 8]")
    mu0 = repelling_fixed_point(lambda0)
    gauges = [GaugeFunction(mu0, float(g)) for g in gamma_list]
    if resolution is None:
        resolution = coarsest_resolution(region.side, gauges[0].t_max if gauges else 1.0 / (mu0 + 1.0))
    ladder = classification_ladder(m, region, resolution, levels, factor, max_steps, sample_mode, escape_re, threads)
    tail = min(levels, max(3, levels - 2))
    out = []
    for g in gauges:
        counts = [c.non_fatou_count for c in ladder]
        sums, logs = [], []
        for c in ladder:
            sums.append(gauged_sum(c, g))
            n = c.non_fatou_count
            logs.append(math.log(n) + g.log_value(SQRT2 * c.resolution) if n else -math.inf)
        slope, trend = fit_trend(logs[-tail:])
        out.append(
            DichotomyReport(
                g.gamma,
                tuple(c.resolution for c in ladder),
                tuple(counts),
                tuple(sums),
                slope,
                trend,
                tail,
            )
        )
    return out


@dataclass(frozen=True)
class PreimageReport:
    R: float
    n_values: tuple[Optional[int], ...]
    histogram: dict
    all_finite: bool


def preimage_union_check(m: ExpMap, R: float, sample_points: Sequence[complex], n_max: int = 200) -> PreimageReport:
    """Least ``n`` after which every computed iterate has ``Re >= R``.

    Orbits stop at ``n_max`` steps or at the first overflowed iterate.
    Overflowed iterates count as escaped. ``None`` marks points whose last
    computed iterate is still left of ``R``.
    """
    ns: list[Optional[int]] = []
    for z in sample_points:
        re = []
        w = complex(z)
        for _ in range(n_max + 1):
            re.append(w.real)
            nxt = apply(m, w)
            if not isinstance(nxt, complex):
                re.append(math.inf)
                break
            w = nxt
        first = None
        for j in range(len(re) - 1, -1, -1):
            if re[j] >= R:
                first = j
            else:
                break
        ns.append(first)
    hist: dict = {}
    for v in ns:
        hist[v] = hist.get(v, 0) + 1
    return PreimageReport(float(R), tuple(ns), hist, all(v is not None for v in ns))
