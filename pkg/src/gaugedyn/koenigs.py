"""Koenigs linearizer of the exponential family and the gauges built on it.

In the coordinate ``x -> x - mu`` the map ``mu*exp(-mu)*exp(z)`` becomes
``mu*(exp(x) - 1)``, which fixes 0 with multiplier ``mu``. Its inverse on the
positive axis is ``L(x) = log(1 + x/mu)`` and the linearizer is

    phi_tilde(x) = lim mu**n * L**n(x),

normalised by ``phi_tilde(0) = 0`` and ``phi_tilde'(0) = 1``. It satisfies
``phi_tilde(mu*(exp(x) - 1)) = mu * phi_tilde(x)``. Large arguments are
first pulled back into a fundamental interval ``[x0, x1)``, which keeps the
limit loop short and well conditioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import repelling_fixed_point
from .errors import ConvergenceError, DomainError

PHI_ARG_MAX = 1e300


def inverse_step(mu: float, x: float) -> float:
    """``L(x) = log(1 + x/mu)``, the inverse of ``mu*(exp(x) - 1)``."""
    if not x > -mu:
        raise DomainError(f"inverse_step needs x > -mu, got x={x!r}, mu={mu!r}")
    return math.log1p(x / mu)


@dataclass(frozen=True)
class KoenigsEvaluator:
    """Linearizer state for one multiplier ``mu > 1``.

    ``x1`` satisfies ``L(x) <= log x`` for every ``x >= x1``. ``x0 = L(x1)`` is
    the foot of the fundamental interval ``[x0, x1)``.
    """

    mu: float
    tol: float = 1e-12
    max_iter: int = 10_000
    x1: float = field(init=False)
    x0: float = field(init=False)

    def __post_init__(self):
        mu = float(self.mu)
        if not (mu > 1.0 and math.isfinite(mu)):
            raise DomainError(f"mu must be a finite real > 1, got {self.mu!r}")
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        # 1 + x/mu <= x gives L(x) <= log x from mu/(mu-1) onwards; e*mu
        # additionally forces x0 = log(1 + e) > 1.
        x1 = max(mu / (mu - 1.0), math.e * mu)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x0", math.log1p(x1 / mu))

    @classmethod
    def from_lambda(cls, lam: float, **kw) -> "KoenigsEvaluator":
        return cls(repelling_fixed_point(lam), **kw)

    def step(self, x: float) -> float:
        return inverse_step(self.mu, x)

    def reduce(self, x: float) -> tuple[int, float]:
        """Return ``(n, L**n(x))`` with ``L**n(x)`` in ``[x0, x1)``."""
        if x < self.x0:
            raise DomainError(f"x={x!r} lies below the fundamental interval [x0={self.x0!r}, x1)")
        n, y = 0, float(x)
        while y >= self.x1:
            y = math.log1p(y / self.mu)
            n += 1
        return n, y

    def limit(self, y: float) -> float:
        """Raw limit ``lim mu**n L**n(y)`` without any reduction."""
        if y < 0:
            raise DomainError("linearizer is evaluated on [0, inf)")
        mu = self.mu
        # phi_tilde(y) = y - y**2 / (2*(mu - 1)) + ..., so y itself is within tol.
        if y <= (mu - 1.0) * self.tol:
            return float(y)
        p, prev = 1.0, y
        for _ in range(self.max_iter):
            y = math.log1p(y / mu)
            p *= mu
            val = p * y
            if abs(val - prev) < self.tol * abs(val):
                return val
            prev = val
        raise ConvergenceError(f"linearizer limit did not settle in {self.max_iter} steps")

    def phi_tilde(self, x: float) -> float:
        if x < 0:
            raise DomainError(f"linearizer needs x >= 0, got {x!r}")
        if x > PHI_ARG_MAX:
            raise DomainError("argument above 1e300; use tower_gauge")
        if x >= self.x1:
            n, y = self.reduce(x)
            return self.mu ** n * self.limit(y)
        return self.limit(float(x))

    def phi(self, x: float) -> float:
        """``Phi_lambda(x) = phi_tilde(x - mu)`` for the parameter with ``beta = mu``."""
        if x < self.mu:
            raise DomainError(f"Phi_lambda needs x >= beta={self.mu!r}, got {x!r}")
        return self.phi_tilde(x - self.mu)

    def log_phi_tilde(self, x: float) -> float:
        if x >= self.x1:
            n, y = self.reduce(x)
            return n * math.log(self.mu) + math.log(self.limit(y))
        return math.log(self.phi_tilde(x))


def reduction_count(ev: KoenigsEvaluator, x: float) -> int:
    """Least ``n`` with ``L**n(x)`` in ``[x0, x1)`` (0 when ``x`` already is)."""
    return ev.reduce(x)[0]


def linearizer_eval(ev: KoenigsEvaluator, x: float) -> float:
    return ev.phi_tilde(x)


def phi_eval(lam: float, x: float, tol: float = 1e-12) -> float:
    """Koenigs function ``Phi_lambda`` at ``x >= beta``."""
    return KoenigsEvaluator(repelling_fixed_point(lam), tol=tol).phi(x)


@dataclass(frozen=True)
class GaugeFunction:
    """Gauge ``h(t) = t**2 * Phi(1/t)**gamma`` with ``Phi`` for the parameter ``beta = mu``."""

    mu: float
    gamma: float
    tol: float = 1e-12

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma!r}")
        KoenigsEvaluator(self.mu)

    @classmethod
    def from_lambda(cls, lam: float, gamma: float) -> "GaugeFunction":
        return cls(repelling_fixed_point(lam), gamma)

    @property
    def evaluator(self) -> KoenigsEvaluator:
        return KoenigsEvaluator(self.mu, tol=self.tol)

    @property
    def t_max(self) -> float:
        return 1.0 / (self.mu + 1.0)

    def _check(self, t: float) -> None:
        if not (0.0 < t <= self.t_max):
            raise DomainError(f"gauge argument t={t!r} outside (0, {self.t_max!r}]")
        if 1.0 / t > PHI_ARG_MAX:
            raise DomainError("gauge argument below 1e-300; use the tower form")

    def g(self, t: float) -> float:
        """``Phi(1/t)**gamma``."""
        self._check(t)
        return self.evaluator.phi(1.0 / t) ** self.gamma

    def __call__(self, t: float) -> float:
        return t * t * self.g(t)

    def log_value(self, t: float) -> float:
        """``log h(t)``; stays finite where ``h(t)`` itself would underflow."""
        self._check(t)
        return 2.0 * math.log(t) + self.gamma * self.evaluator.log_phi_tilde(1.0 / t - self.mu)


def gauge_eval(g: GaugeFunction, t: float) -> float:
    return g(t)


@dataclass(frozen=True)
class TowerValue:
    """``(beta**level * base)**gamma`` held as a logarithm."""

    level: int
    base: float
    beta: float
    gamma: float

    @property
    def log_value(self) -> float:
        return self.gamma * (self.level * math.log(self.beta) + math.log(self.base))

    @property
    def value(self) -> float:
        if self.level == 0:
            return self.base ** self.gamma
        lv = self.log_value
        if lv > 709.0:
            raise OverflowError("tower value exceeds double range; use log_value")
        return math.exp(lv)


def tower_gauge(lam: float, gamma: float, k: int, x0: float) -> TowerValue:
    """``Phi(E**k(x0))**gamma = (beta**k * Phi(x0))**gamma`` without forming ``E**k(x0)``."""
    if k < 0:
        raise DomainError("tower level must be >= 0")
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    beta = repelling_fixed_point(lam)
    return TowerValue(int(k), KoenigsEvaluator(beta).phi(x0), beta, float(gamma))


@dataclass(frozen=True)
class EquivalenceStats:
    ratio_min: float
    ratio_max: float
    log_spread: float
    drift_slope: float
    max_count_gap: int
    log_ratios: tuple[float, ...]
    count_gaps: tuple[int, ...]


def equivalence_probe(
    mu1: float,
    gamma1: float,
    mu2: float,
    gamma2: float,
    t_grid: Sequence[float],
    tail: int | None = None,
) -> EquivalenceStats:
    """Compare two gauges with ``mu1**gamma1 == mu2**gamma2`` on ``t_grid``.

    The drift slope is the least-squares slope of ``log(h1/h2)`` against
    ``log t`` over the last ``tail`` grid points (default: half the grid).
    Count gaps are ``|n_mu1(1/t) - n_mu2(1/t)|``.
    """
    a1, a2 = gamma1 * math.log(mu1), gamma2 * math.log(mu2)
    if abs(a1 - a2) > 1e-12 * max(abs(a1), abs(a2)):
        raise DomainError("gauges must satisfy mu1**gamma1 == mu2**gamma2")
    g1, g2 = GaugeFunction(mu1, gamma1), GaugeFunction(mu2, gamma2)
    ev1, ev2 = g1.evaluator, g2.evaluator
    ts = np.asarray(t_grid, dtype=float)
    if ts.size < 2:
        raise DomainError("t_grid needs at least two points")
    logr = np.array([g1.log_value(t) - g2.log_value(t) for t in ts])
    gaps = []
    for t in ts:
        x = 1.0 / t
        if x < max(ev1.x1, ev2.x1):
            raise DomainError(f"t={t!r} too large for the count comparison")
        gaps.append(abs(reduction_count(ev1, x) - reduction_count(ev2, x)))
    tail = ts.size // 2 if tail is None else int(tail)
    tail = max(2, min(tail, ts.size))
    slope = float(np.polyfit(np.log(ts[-tail:]), logr[-tail:], 1)[0])
    return EquivalenceStats(
        ratio_min=float(np.exp(logr.min())),
        ratio_max=float(np.exp(logr.max())),
        log_spread=float(logr.max() - logr.min()),
        drift_slope=slope,
        max_count_gap=int(max(gaps)),
        log_ratios=tuple(float(v) for v in logr),
        count_gaps=tuple(int(g) for g in gaps),
    )
