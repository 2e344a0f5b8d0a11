import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gaugedyn.dynamics import (
    CODE_ATTRACTED,
    CODE_ESCAPING,
    OVERFLOW,
    ExpMap,
    StripKind,
    StripSpec,
    Verdict,
    apply,
    apply_array,
    attracting_fixed_point,
    classify_orbit,
    classify_points,
    inverse_branch,
    inverse_branch_near,
    postcritical_distance,
    repelling_fixed_point,
    strip_contains,
)
from gaugedyn.errors import DomainError

# mpmath oracle (60 digits, bisection then findroot), frozen here.
BETA_025 = 2.1532923641103496492
ALPHA_025 = 0.35740295618138890307
BETA_01 = 3.5771520639572972184
ALPHA_01 = 0.11183255915896296483
ALPHA_2E2 = 0.40637573995995990768
RHO_2E2 = 0.45023853974004739145

LAM2 = 2 * math.exp(-2)


class TestFixedPoints:
    def test_parametrization_mu2(self):
        assert repelling_fixed_point(LAM2) == pytest.approx(2.0, rel=1e-12)

    def test_parametrization_e(self):
        assert repelling_fixed_point(math.exp(1 - math.e)) == pytest.approx(math.e, rel=1e-12)

    @pytest.mark.parametrize("lam,beta,alpha", [(0.25, BETA_025, ALPHA_025), (0.1, BETA_01, ALPHA_01)])
    def test_oracle_values(self, lam, beta, alpha):
        assert repelling_fixed_point(lam) == pytest.approx(beta, rel=1e-13)
        assert attracting_fixed_point(lam) == pytest.approx(alpha, rel=1e-13)

    def test_alpha_mu2(self):
        assert attracting_fixed_point(LAM2) == pytest.approx(ALPHA_2E2, rel=1e-13)

    def test_alpha_tends_to_one_near_boundary(self):
        lams = [1 / math.e - 10.0 ** -p for p in (2, 4, 6, 8)]
        alphas = [attracting_fixed_point(l, tol=1e-9) for l in lams]
        assert all(a < b for a, b in zip(alphas, alphas[1:]))
        assert 1 - alphas[-1] < 1e-3

    @pytest.mark.parametrize("lam", [0.0, -0.1, 1 / math.e, 0.5, float("nan")])
    def test_domain(self, lam):
        with pytest.raises(DomainError):
            repelling_fixed_point(lam)
        with pytest.raises(DomainError):
            attracting_fixed_point(lam)

    def test_residuals_random(self):
        rng = np.random.default_rng(1)
        for lam in rng.uniform(0.01, 1 / math.e - 0.01, 100):
            m = ExpMap.from_lambda(float(lam))
            assert abs(lam * math.exp(m.alpha) - m.alpha) <= 1e-12
            assert abs(lam * math.exp(m.beta) - m.beta) <= 1e-12
            assert 0 < m.alpha < 1 < m.beta

    @given(st.floats(1.01, 30.0))
    def test_from_mu_roundtrip(self, mu):
        m = ExpMap.from_mu(mu)
        assert m.beta == mu
        assert mu * math.exp(-mu) == pytest.approx(m.lam, rel=1e-15)
        assert m.lam * math.exp(m.alpha) == pytest.approx(m.alpha, rel=1e-12)

    def test_postcritical_tail(self, mu2):
        tail = np.array(mu2.postcritical_tail)
        assert tail[0] == 0.0
        assert np.all(np.diff(tail) > 0)
        assert tail[-1] <= mu2.alpha


class TestApply:
    def test_fixed_points(self, mu2):
        assert apply(mu2, 2) == pytest.approx(2.0, rel=1e-15)
        assert apply(mu2, mu2.alpha) == pytest.approx(mu2.alpha, rel=1e-12)

    def test_rotation(self):
        m = ExpMap.from_lambda(0.2)
        assert apply(m, 1j * math.pi) == pytest.approx(-0.2, abs=1e-16)

    def test_overflow_sentinel(self, mu2):
        assert apply(mu2, 700) is OVERFLOW
        assert not OVERFLOW
        assert np.isnan(apply_array(mu2, np.array([700.0]))[0])

    def test_complex_lambda_supported(self):
        m = ExpMap.from_lambda(1j)
        assert m.alpha is None
        assert apply(m, 0) == 1j
        with pytest.raises(DomainError):
            classify_orbit(m, 0)

    def test_monotone_escape_real_axis(self, mu2):
        xs = np.linspace(mu2.beta + 1e-6, 600, 5000)
        assert np.all(apply_array(mu2, xs).real > xs)


class TestClassify:
    def test_alpha_attracted_immediately(self, mu2):
        res = classify_orbit(mu2, mu2.alpha)
        assert res.verdict is Verdict.ATTRACTED and res.steps_used == 0

    def test_above_beta_escapes(self, mu2):
        assert classify_orbit(mu2, mu2.beta + 1).verdict is Verdict.ESCAPING

    def test_zero_attracted(self, mu2):
        # Oracle: |0 - alpha| = 0.40638 < rho = 0.45024, so step 0.
        assert mu2.attraction_radius == pytest.approx(RHO_2E2, rel=1e-13)
        res = classify_orbit(mu2, 0)
        assert res.verdict is Verdict.ATTRACTED and res.steps_used == 0

    def test_escape_threshold_floor(self, mu2):
        with pytest.raises(DomainError):
            classify_orbit(mu2, 1, escape_re=3.9)

    def test_undecided_when_out_of_steps(self, mu2):
        res = classify_orbit(mu2, 2.0 + 1e-9, max_steps=3)
        assert res.verdict is Verdict.UNDECIDED and res.steps_used == 3

    def test_vectorized_matches_scalar(self, mu2):
        rng = np.random.default_rng(7)
        z = rng.uniform(-2, 6, 400) + 1j * rng.uniform(-4, 4, 400)
        codes, steps = classify_points(mu2, z, max_steps=100)
        code_of = {Verdict.ATTRACTED: CODE_ATTRACTED, Verdict.ESCAPING: CODE_ESCAPING, Verdict.UNDECIDED: 0}
        for zi, c, s in zip(z, codes, steps):
            r = classify_orbit(mu2, zi, max_steps=100)
            assert code_of[r.verdict] == c and r.steps_used == s

    def test_threads_do_not_change_codes(self, mu2):
        rng = np.random.default_rng(8)
        z = rng.uniform(-2, 6, 70_000) + 1j * rng.uniform(-4, 4, 70_000)
        a = classify_points(mu2, z, threads=1)
        b = classify_points(mu2, z, threads=4)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_attraction_certificate(self, mu2):
        rng = np.random.default_rng(3)
        alpha, rho = mu2.alpha, mu2.attraction_radius
        rad = rho * np.sqrt(rng.uniform(0, 1, 1000)) * 0.999999
        z = alpha + rad * np.exp(2j * np.pi * rng.uniform(0, 1, 1000))
        bound = math.sqrt(alpha) + 1e-9
        d = np.abs(z - alpha)
        for _ in range(30):
            z = mu2.lam * np.exp(z)
            d_new = np.abs(z - alpha)
            assert np.all(d_new < rho)
            nz = d > 1e-200
            assert np.all(d_new[nz] <= bound * d[nz])
            d = d_new


class TestStrips:
    def test_examples(self):
        j = StripSpec(0.1)
        assert strip_contains(j, 0)
        assert not strip_contains(j, 1j * math.pi / 2)
        assert strip_contains(StripSpec(0.1, kind=StripKind.FATOU), 1j * math.pi)

    def test_closed_band_edges(self):
        j = StripSpec(0.1)
        assert strip_contains(j, 1j * (math.pi / 2 - 0.1))
        assert strip_contains(j, 1j * (2 * math.pi - math.pi / 2 + 0.1 + 1e-12))

    def test_arg_shift(self):
        j = StripSpec(0.1, arg_lambda=1.0)
        assert strip_contains(j, -1j)
        assert not strip_contains(j, 1j * 0.6)

    @given(st.floats(-50, 50), st.floats(0.01, 1.5))
    def test_kinds_disjoint(self, y, delta):
        j = StripSpec(delta)
        f = StripSpec(delta, kind=StripKind.FATOU)
        assert not (strip_contains(j, 1j * y) and strip_contains(f, 1j * y))

    def test_domain(self):
        for d in (0.0, math.pi / 2, -1):
            with pytest.raises(DomainError):
                StripSpec(d)

    def test_bands_between(self):
        bands = StripSpec(0.2).bands_between(-1.0, 7.0)
        assert [k for k, _, _ in bands] == [0, 1]
        k, lo, hi = bands[1]
        assert lo == pytest.approx(2 * math.pi - (math.pi / 2 - 0.2))

    def test_real_growth_inequality(self):
        rng = np.random.default_rng(11)
        for lam in (LAM2, 0.1 * cmath.exp(0.7j)):
            m = ExpMap.from_lambda(lam)
            delta = 0.2
            strips = StripSpec(delta, arg_lambda=m.arg_lambda)
            y = rng.uniform(-strips.half_width, strips.half_width, 10_000) + 2 * math.pi * rng.integers(-3, 4, 10_000)
            z = rng.uniform(-5, 40, 10_000) + 1j * (y - m.arg_lambda)
            assert strips.contains(z).all()
            lhs = apply_array(m, z).real
            rhs = abs(lam) * math.cos(math.pi / 2 - delta) * np.exp(z.real)
            assert np.all(lhs >= rhs)


class TestInverse:
    def test_examples(self, mu2):
        assert inverse_branch(mu2, 2, 0) == pytest.approx(2.0, rel=1e-15)
        assert inverse_branch(mu2, mu2.lam, 0) == 0
        assert inverse_branch(mu2, mu2.lam, 1) == pytest.approx(2j * math.pi, rel=1e-15)

    def test_zero(self, mu2):
        with pytest.raises(DomainError):
            inverse_branch(mu2, 0, 0)

    def test_round_trip_annulus(self, mu2):
        rng = np.random.default_rng(5)
        mod = np.exp(rng.uniform(math.log(0.1), math.log(1e3), 10_000))
        w = mod * np.exp(1j * rng.uniform(-math.pi, math.pi, 10_000))
        ks = rng.integers(-2, 3, 10_000)
        for wi, k in zip(w, ks):
            z = inverse_branch(mu2, wi, int(k))
            assert abs(apply(mu2, z) - wi) <= 1e-12 * abs(wi)

    def test_near_branch(self, mu2):
        z = 3.0 + 1j * (2 * math.pi * 5 + 0.3)
        w = apply(mu2, z)
        assert inverse_branch_near(mu2, w, 2 * math.pi * 5) == pytest.approx(z, rel=1e-13)

    def test_postcritical_distance(self, mu2):
        assert postcritical_distance(mu2, 0.2) == 0.0
        assert postcritical_distance(mu2, -1) == pytest.approx(1.0)
        assert postcritical_distance(mu2, 0.2 + 2j) == pytest.approx(2.0)
        assert postcritical_distance(mu2, 2) == pytest.approx(2 - mu2.alpha)
