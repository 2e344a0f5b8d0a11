"""The exponential family ``E(z) = lam * exp(z)``.

For ``0 < lam < 1/e`` the map has two real fixed points ``0 < alpha < 1 < beta``:
``alpha`` attracts the whole Fatou set and ``beta`` is repelling with
multiplier ``beta``. Writing ``lam = mu * exp(-mu)`` gives ``beta = mu`` exactly,
which is the parametrization used throughout the package.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ._parallel import CHUNK, chunk_bounds, ordered_map
from .errors import ConvergenceError, DomainError

OVERFLOW_RE = 690.0
INV_E = math.exp(-1.0)
TWO_PI = 2.0 * math.pi


class _Overflow:
    """Sentinel returned by :func:`apply` when ``Re z`` exceeds ``OVERFLOW_RE``."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "OVERFLOW"

    def __bool__(self) -> bool:
        return False


OVERFLOW = _Overflow()


def _check_real_lambda(lam) -> float:
    if isinstance(lam, complex):
        if lam.imag != 0.0:
            raise DomainError(f"lambda must be real, got {lam!r}")
        lam = lam.real
    lam = float(lam)
    if not (0.0 < lam < INV_E):
        raise DomainError(f"lambda must lie in (0, 1/e), got {lam!r}")
    return lam


def _rel_residual(lam: float, x: float) -> float:
    return abs(lam * math.exp(x) - x) / abs(x)


def _solve(lam: float, lo: float, hi: float, tol: float) -> float:
    # g(x) = x - ln x + ln lam vanishes exactly at the fixed points and is
    # far better conditioned than lam*e^x - x for large beta.
    loglam = math.log(lam)

    def g(x: float) -> float:
        return x - math.log(x) + loglam

    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if glo * ghi > 0.0:
        raise ConvergenceError(
            f"fixed point not isolated on ({lo!r}, {hi!r}); lambda too close to 1/e"
        )
    x = brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    # Newton polish, accepted only when it improves the residual.
    for _ in range(3):
        d = 1.0 - 1.0 / x
        if d == 0.0:
            break
        cand = x - g(x) / d
        if not (lo < cand < hi) or _rel_residual(lam, cand) >= _rel_residual(lam, x):
            break
        x = cand
    # The neighbouring doubles bound what working precision can deliver.
    best = min(
        (x, math.nextafter(x, -math.inf), math.nextafter(x, math.inf)),
        key=lambda v: _rel_residual(lam, v),
    )
    if _rel_residual(lam, best) > tol:
        raise ConvergenceError(
            f"relative residual {_rel_residual(lam, best):.3e} exceeds tol={tol:.3e}"
        )
    return best


def repelling_fixed_point(lam: float, tol: float = 1e-12) -> float:
    """Repelling real fixed point ``beta > 1`` of ``lam * exp(z)``.

    The root is bracketed on ``(1, W)``, with ``W`` doubled until
    ``lam * exp(W) > W``. It is then isolated by Brent's method and
    polished with Newton steps.

    Raises
    ------
    DomainError
        If ``lam`` is not in ``(0, 1/e)`` or ``tol <= 0``.
    ConvergenceError
        If the relative residual cannot reach ``tol`` in double precision.
    """
    lam = _check_real_lambda(lam)
    if not tol > 0:
        raise DomainError("tol must be positive")
    w = 2.0
    while lam * math.exp(w) <= w:
        w *= 2.0
        if w > 1e4:
            raise ConvergenceError("no upper bracket for beta")
    return _solve(lam, 1.0, w, tol)


def attracting_fixed_point(lam: float, tol: float = 1e-12) -> float:
    """Attracting real fixed point ``alpha`` in ``(0, 1)``; its multiplier is ``alpha``."""
    lam = _check_real_lambda(lam)
    if not tol > 0:
        raise DomainError("tol must be positive")
    # lam*e^lam > lam, so the root lies strictly above lam.
    return _solve(lam, lam, 1.0, tol)


def _postcritical_tail(lam: float, alpha: float, cap: int = 256) -> tuple[float, ...]:
    tail = [0.0]
    x = 0.0
    for _ in range(cap - 1):
        nxt = lam * math.exp(x)
        if not (x < nxt < alpha):
            break
        tail.append(nxt)
        x = nxt
        if alpha - x <= 1e-12 * alpha:
            break
    return tuple(tail)


@dataclass(frozen=True)
class ExpMap:
    """A member ``lam * exp(z)`` of the exponential family.

    Build instances with :meth:`from_lambda` or :meth:`from_mu`. The
    fixed-point data is ``None`` when ``lam`` is not real in ``(0, 1/e)``.
    """

    lam: complex | float
    alpha: Optional[float] = None
    beta: Optional[float] = None
    postcritical_tail: tuple[float, ...] = field(default=(), repr=False)

    @classmethod
    def from_lambda(cls, lam: complex | float, tol: float = 1e-12) -> "ExpMap":
        if lam == 0:
            raise DomainError("lambda must be nonzero")
        value = complex(lam)
        if value.imag == 0.0 and 0.0 < value.real < INV_E:
            x = value.real
            alpha = attracting_fixed_point(x, tol)
            return cls(x, alpha, repelling_fixed_point(x, tol), _postcritical_tail(x, alpha))
        return cls(value if value.imag != 0.0 else value.real)

    @classmethod
    def from_mu(cls, mu: float, tol: float = 1e-12) -> "ExpMap":
        """Map with ``lam = mu * exp(-mu)``, whose repelling fixed point is ``mu`` exactly."""
        mu = float(mu)
        if not (mu > 1.0 and math.isfinite(mu)):
            raise DomainError(f"mu must be a finite real > 1, got {mu!r}")
        lam = mu * math.exp(-mu)
        if not lam > 0.0:
            raise DomainError(f"mu={mu!r} underflows lambda")
        alpha = attracting_fixed_point(lam, tol)
        return cls(lam, alpha, mu, _postcritical_tail(lam, alpha))

    @property
    def is_hyperbolic_real(self) -> bool:
        return self.alpha is not None

    @property
    def arg_lambda(self) -> float:
        return cmath.phase(self.lam)

    @property
    def attraction_radius(self) -> float:
        """Radius ``rho = -ln(alpha)/2`` of the forward-invariant disc about ``alpha``.

        On ``D(alpha, rho)`` we have ``|E'| <= alpha * e^rho = sqrt(alpha)``.
        """
        self._require_real()
        return -0.5 * math.log(self.alpha)

    @property
    def default_escape_re(self) -> float:
        self._require_real()
        return max(50.0, 2.0 * self.beta)

    def _require_real(self) -> None:
        if self.alpha is None:
            raise DomainError("operation needs real lambda in (0, 1/e)")

    def __call__(self, z):
        return apply(self, z)


def apply(m: ExpMap, z: complex):
    """Evaluate ``lam * exp(z)``, or return ``OVERFLOW`` when ``Re z > 690``."""
    z = complex(z)
    if z.real > OVERFLOW_RE:
        return OVERFLOW
    return m.lam * cmath.exp(z)


def apply_array(m: ExpMap, z: np.ndarray) -> np.ndarray:
    """Vectorized :func:`apply`; overflowed entries become ``nan``."""
    z = np.asarray(z, dtype=complex)
    out = np.full(z.shape, complex(np.nan, np.nan))
    ok = z.real <= OVERFLOW_RE
    out[ok] = m.lam * np.exp(z[ok])
    return out


class Verdict(Enum):
    ATTRACTED = "Attracted"
    ESCAPING = "EscapingCandidate"
    UNDECIDED = "Undecided"


# Integer codes used by the vectorized classifier.
CODE_UNDECIDED, CODE_ATTRACTED, CODE_ESCAPING = 0, 1, 2
CODE_TO_VERDICT = {
    CODE_UNDECIDED: Verdict.UNDECIDED,
    CODE_ATTRACTED: Verdict.ATTRACTED,
    CODE_ESCAPING: Verdict.ESCAPING,
}


@dataclass(frozen=True)
class OrbitResult:
    states: tuple[complex, ...]
    verdict: Verdict
    steps_used: int


def _orbit_params(m: ExpMap, escape_re: Optional[float]) -> float:
    m._require_real()
    if escape_re is None:
        return m.default_escape_re
    if not escape_re >= 2.0 * m.beta:
        raise DomainError(f"escape_re={escape_re!r} must be >= 2*beta={2 * m.beta!r}")
    return float(escape_re)


def classify_orbit(
    m: ExpMap,
    z: complex,
    max_steps: int = 200,
    escape_re: Optional[float] = None,
    keep_states: int = 64,
) -> OrbitResult:
    """Follow the orbit of ``z`` until it is certified attracted or crosses ``escape_re``.

    ``Attracted`` means some iterate entered ``D(alpha, rho)``, which the map
    contracts into itself. ``EscapingCandidate`` means some iterate reached
    ``Re >= escape_re`` or overflowed. That is rigorous on the real axis
    and only a heuristic label elsewhere.
    """
    esc = _orbit_params(m, escape_re)
    alpha, rho = m.alpha, m.attraction_radius
    lam = np.float64(m.lam)
    w = np.complex128(z)
    states: list[complex] = []
    for step in range(max_steps + 1):
        if len(states) < keep_states:
            states.append(complex(w))
        if abs(w - alpha) < rho:
            return OrbitResult(tuple(states), Verdict.ATTRACTED, step)
        if w.real >= esc or w.real > OVERFLOW_RE:
            return OrbitResult(tuple(states), Verdict.ESCAPING, step)
        if step == max_steps:
            break
        w = lam * np.exp(w)
    return OrbitResult(tuple(states), Verdict.UNDECIDED, max_steps)


def _classify_chunk(z: np.ndarray, lam: float, alpha: float, rho: float, esc: float, max_steps: int):
    n = z.shape[0]
    codes = np.zeros(n, dtype=np.int8)
    steps = np.full(n, max_steps, dtype=np.int32)
    idx = np.arange(n)
    w = z.copy()
    lam = np.float64(lam)
    for step in range(max_steps + 1):
        att = np.abs(w - alpha) < rho
        esc_mask = ~att & ((w.real >= esc) | (w.real > OVERFLOW_RE))
        done = att | esc_mask
        if done.any():
            codes[idx[att]] = CODE_ATTRACTED
            codes[idx[esc_mask]] = CODE_ESCAPING
            steps[idx[done]] = step
            keep = ~done
            idx, w = idx[keep], w[keep]
        if idx.size == 0 or step == max_steps:
            break
        w = lam * np.exp(w)
    return codes, steps


def classify_points(
    m: ExpMap,
    z,
    max_steps: int = 200,
    escape_re: Optional[float] = None,
    threads: Optional[int] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`classify_orbit` returning integer codes and step counts.

    Codes are ``CODE_UNDECIDED``, ``CODE_ATTRACTED`` and ``CODE_ESCAPING``.
    Each point is classified independently with the same arithmetic as the
    scalar routine, so the result does not depend on ``threads``.
    """
    esc = _orbit_params(m, escape_re)
    alpha, rho = m.alpha, m.attraction_radius
    flat = np.ascontiguousarray(np.asarray(z, dtype=complex).ravel())
    bounds = chunk_bounds(flat.size, CHUNK)
    parts = ordered_map(
        lambda b: _classify_chunk(flat[b[0]:b[1]], m.lam, alpha, rho, esc, max_steps),
        bounds,
        threads,
    )
    if not parts:
        return np.zeros(0, dtype=np.int8), np.zeros(0, dtype=np.int32)
    codes = np.concatenate([p[0] for p in parts])
    steps = np.concatenate([p[1] for p in parts])
    shape = np.shape(z)
    return codes.reshape(shape), steps.reshape(shape)


class StripKind(Enum):
    JULIA = "JuliaStrips"
    FATOU = "FatouStrips"


@dataclass(frozen=True)
class StripSpec:
    """Horizontal strip family of half-width ``pi/2 - delta``.

    Julia strips are centred on ``Im z = 2*pi*k - arg_lambda``. On them the
    map sends rightward points further right. Fatou strips are centred
    on ``Im z = pi + 2*pi*k - arg_lambda``. On them the map sends points
    into the left half-plane.
    """

    delta: float
    arg_lambda: float = 0.0
    kind: StripKind = StripKind.JULIA

    def __post_init__(self):
        if not (0.0 < self.delta < math.pi / 2):
            raise DomainError(f"delta must lie in (0, pi/2), got {self.delta!r}")

    @property
    def half_width(self) -> float:
        return math.pi / 2 - self.delta

    @property
    def _offset(self) -> float:
        return 0.0 if self.kind is StripKind.JULIA else math.pi

    def band_center(self, k: int) -> float:
        return TWO_PI * k + self._offset - self.arg_lambda

    def band_index(self, y):
        """Index ``k`` of the nearest band centre to ``Im z = y``."""
        return np.rint((np.asarray(y, dtype=float) + self.arg_lambda - self._offset) / TWO_PI).astype(np.int64)

    def contains(self, z) -> np.ndarray:
        y = np.imag(np.asarray(z, dtype=complex))
        v = y + self.arg_lambda - self._offset
        v = v - TWO_PI * np.rint(v / TWO_PI)
        return np.abs(v) <= self.half_width

    def bands_between(self, y0: float, y1: float) -> list[tuple[int, float, float]]:
        """Bands ``(k, lo, hi)`` whose closed Im-interval meets ``[y0, y1]``."""
        hw = self.half_width
        k_lo = math.floor((y0 - hw + self.arg_lambda - self._offset) / TWO_PI)
        k_hi = math.ceil((y1 + hw + self.arg_lambda - self._offset) / TWO_PI)
        out = []
        for k in range(k_lo, k_hi + 1):
            c = self.band_center(k)
            lo, hi = c - hw, c + hw
            if hi >= y0 and lo <= y1:
                out.append((k, lo, hi))
        return out

    def bbox(self):
        return None


def strip_contains(strips: StripSpec, z: complex) -> bool:
    """Exact membership of ``z`` in the strip family (closed bands)."""
    return bool(strips.contains(complex(z)))


def inverse_branch(m: ExpMap, w: complex, k: int = 0) -> complex:
    """Branch ``k`` of the inverse: ``log|w/lam| + i(arg(w/lam) + 2*pi*k)``."""
    w = complex(w)
    if w == 0:
        raise DomainError("w = 0 has no preimage")
    q = cmath.log(w / m.lam)
    return complex(q.real, q.imag + TWO_PI * k)


def inverse_branch_near(m: ExpMap, w, im_ref):
    """Vectorized inverse branch picking the preimage with Im closest to ``im_ref``."""
    w = np.asarray(w, dtype=complex)
    if np.any(w == 0):
        raise DomainError("w = 0 has no preimage")
    q = np.log(w / m.lam)
    k = np.rint((np.asarray(im_ref, dtype=float) - q.imag) / TWO_PI)
    return q + 1j * TWO_PI * k


def postcritical_distance(m: ExpMap, z) -> np.ndarray | float:
    """Distance to the postcritical set, taken as the segment ``[0, alpha]``."""
    m._require_real()
    z = np.asarray(z, dtype=complex)
    x = np.clip(z.real, 0.0, m.alpha)
    d = np.abs(z - x)
    return float(d) if d.ndim == 0 else d
