import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gaugedyn.dynamics import ExpMap, StripSpec, Verdict, apply_array, classify_orbit
from gaugedyn.errors import BudgetError, DepthOverflow, DomainError, EmptyPacking
from gaugedyn.geometry import Box, empirical_distortion, image_square_sandwich
from gaugedyn.koenigs import GaugeFunction, phi_eval
from gaugedyn.nested import (
    Level,
    NestedFamily,
    ball_mass,
    breakpoint_gamma,
    construct,
    density_factor,
    divergence_product,
    divergence_slope,
    frostman_mass,
    mass_ratio_scan,
    pack_sector,
    verify_nesting,
)

LAM2 = 2 * math.exp(-2)

# Regression baselines for the desk family (mu=2, delta=0.05, r=0.2, seed 3.1, depth 2).
DESK_COUNTS = (1, 24, 156890)
DESK_DENSITY_MIN = (0.654296875, 0.39850780250918094)
DESK_DELTA_CERT = (0.4426843323215821, 0.24826128650004642)
DESK_D = (0.28284271247461906, 0.05155776947919013, 0.0007892393075381858)
DESK_MASS_RATIO_G15 = 102.83583185391282
DESK_MASS_RATIO_G05 = 353.138902378488
MU6_DEPTH1_COUNT = 46942

# mpmath oracle for the closed-form divergence slope at beta=2, eps=0.01.
SLOPE_G12 = 0.098526067088133416997
SLOPE_G09 = -0.10941808707985012966
GAMMA_STAR_1EM6 = 1.0000057707816062557


@pytest.fixture(scope="module")
def desk_report(desk_family):
    return verify_nesting(desk_family, density_samples=1024)


@pytest.fixture(scope="module")
def desk_mass(desk_family):
    return frostman_mass(desk_family)


class TestConstruct:
    def test_depth_zero(self, mu2):
        nf = construct(mu2, StripSpec(0.05), Box(3.1, 0.2), 0.2, 0)
        assert nf.depth == 0 and nf.n_cells(0) == 1
        assert nf.levels[0].image_density is None
        assert nf.d == [pytest.approx(0.2 * math.sqrt(2))]
        with pytest.raises(DomainError):
            verify_nesting(nf)

    def test_desk_counts(self, desk_family):
        assert tuple(desk_family.n_cells(k) for k in range(3)) == DESK_COUNTS
        assert desk_family.d == pytest.approx(list(DESK_D), rel=1e-12)

    def test_parents_valid(self, desk_family):
        for k in range(1, desk_family.depth + 1):
            par = desk_family.levels[k].parent
            assert np.all(np.diff(par) >= 0)
            assert par.min() == 0 and par.max() == desk_family.n_cells(k - 1) - 1

    def test_children_in_sandwich_outer_box(self):
        m = ExpMap.from_mu(6.0)
        r, seed = 0.2, Box(10 + 0j, 0.2)
        nf = construct(m, StripSpec(0.05), seed, r, 1)
        assert nf.n_cells(1) == MU6_DEPTH1_COUNT
        pts = np.concatenate([seed.boundary(64), seed.center + 0.05 * np.exp(1j * np.linspace(0, 6, 40))])
        D = empirical_distortion(np.stack([pts, apply_array(m, pts)], axis=1)).D
        fc = m.lam * math.exp(10)
        _, outer = image_square_sandwich(fc, fc, 0.0, r, D, 0.05)
        corners = nf.levels[1].centers[:, None] + 0.1 * np.array([-1 - 1j, 1 - 1j, 1 + 1j, -1 + 1j])
        assert outer.contains(corners).all()

    def test_empty_packing(self, mu2):
        with pytest.raises(EmptyPacking):
            construct(mu2, StripSpec(0.05), Box(-3 + 0j, 0.2), 0.2, 1)

    def test_depth_overflow(self, mu2):
        with pytest.raises(DepthOverflow):
            construct(mu2, StripSpec(0.05), Box(700 + 0j, 0.2), 0.2, 1)

    def test_budget(self, mu2):
        with pytest.raises(BudgetError):
            construct(mu2, StripSpec(0.05), Box(3.1 + 0j, 0.2), 0.2, 3)

    def test_bad_inputs(self, mu2):
        s = StripSpec(0.05)
        with pytest.raises(DomainError):
            construct(mu2, s, Box(3.1, 0.3), 0.2, 1)
        with pytest.raises(DomainError):
            construct(mu2, s, Box(3.1 + 1.5j, 0.2), 0.2, 1)
        with pytest.raises(DomainError):
            construct(mu2, s, Box(3.1, 0.2), 0.2, 4)
        with pytest.raises(DomainError):
            construct(mu2, s, Box(3.1, 0.2), 0.2, 1, x2=5.0)

    def test_threads_identical(self, mu2):
        a = construct(mu2, StripSpec(0.05), Box(3.1, 0.2), 0.2, 2, threads=1)
        b = construct(mu2, StripSpec(0.05), Box(3.1, 0.2), 0.2, 2, threads=4)
        for la, lb in zip(a.levels, b.levels):
            assert np.array_equal(la.centers, lb.centers)
            assert np.array_equal(la.parent, lb.parent)

    def test_pack_sector_cells_inside(self):
        rho0, rho1, phi0, phi1 = 20.0, 25.0, -0.1, 0.1
        p = 0.2
        cells = pack_sector(rho0, rho1, phi0, phi1, StripSpec(0.05), p)
        assert cells.shape[0] > 0
        for dx in (0, 1):
            for dy in (0, 1):
                z = (cells[:, 0] + dx) * p + 1j * (cells[:, 1] + dy) * p
                assert np.all(np.abs(z) <= rho1 + 1e-12)
                assert np.all(np.abs(z) >= rho0 - 1e-12)
                assert np.all((np.angle(z) >= phi0 - 1e-12) & (np.angle(z) <= phi1 + 1e-12))


class TestAddresses:
    def test_round_trip(self, desk_family):
        nf = desk_family
        rng = np.random.default_rng(0)
        for i in rng.choice(nf.n_cells(2), 50, replace=False):
            z = nf.materialize(2, int(i))
            w = apply_array(nf.map, apply_array(nf.map, z))
            box = nf.image_box(2, int(i))
            assert box.contains(w, tol=1e-9 * max(1.0, abs(box.center))).all()

    def test_reconstruction_bitwise(self, desk_family):
        for i in (0, 7, 1234, 156889):
            a = desk_family.materialize(2, i)
            b = desk_family.materialize(2, i)
            assert a.tobytes() == b.tobytes()

    @given(st.integers(0, DESK_COUNTS[2] - 1))
    def test_index_of_inverts_address(self, desk_family, i):
        assert desk_family.index_of(desk_family.address(2, i)) == (2, i)

    def test_bulk_addresses(self, desk_family):
        addrs = desk_family.addresses(1)
        assert addrs == [desk_family.address(1, i) for i in range(desk_family.n_cells(1))]
        with pytest.raises(DomainError):
            desk_family.index_of((99,))

    def test_export(self, desk_family):
        lines = desk_family.export_lines()
        assert lines[0] == "level,address,center_re,center_im,side"
        assert lines[1].startswith("0,-,3.1,")
        assert len(lines) == 1 + sum(DESK_COUNTS)
        assert lines == desk_family.export_lines()


class TestVerify:
    def test_containment(self, desk_report):
        assert desk_report.containment_violations == 0
        assert desk_report.diameter_violations == 0
        assert desk_report.ok

    def test_depth1_mean_value(self, desk_family, desk_report):
        r = desk_family.r
        seed = desk_family.seed
        min_deriv = desk_family.map.lam * math.exp(seed.center.real - r / 2)
        assert desk_report.measured_diameters[1] <= r * math.sqrt(2) / min_deriv

    def test_d_decreasing(self, desk_report):
        assert desk_report.d_decreasing
        assert all(m <= d * (1 + 1e-9) for m, d in zip(desk_report.measured_diameters, desk_report.d))

    def test_density_baselines(self, desk_report):
        assert desk_report.sampled_density_min == pytest.approx(DESK_DENSITY_MIN, rel=1e-9)
        assert desk_report.delta_certificate == pytest.approx(DESK_DELTA_CERT, rel=1e-9)
        assert all(c > 0 for c in desk_report.delta_certificate)
        # The certificate is a lower bound for the sampled densities.
        assert all(c <= s for c, s in zip(desk_report.delta_certificate, desk_report.sampled_density_min))

    def test_escaping(self, desk_family, desk_report):
        assert desk_report.non_escaping == 0
        assert desk_report.escaping == DESK_COUNTS[2]
        z = desk_family.materialized_centers(2)
        for zi in z[:: max(1, z.size // 200)]:
            assert classify_orbit(desk_family.map, zi).verdict is Verdict.ESCAPING


def _ring_family(n_children):
    """Synthetic depth-1 family whose children all share |centre|."""
    m = ExpMap.from_mu(2.0)
    R = 50.0
    ang = np.linspace(-0.05, 0.05, n_children)
    lv0 = Level(np.array([3.1 + 0j]), np.zeros(1, dtype=np.int64), None, np.ones(1))
    lv1 = Level(R * np.exp(1j * ang), np.zeros(n_children, dtype=np.int64), np.zeros((n_children, 2), dtype=np.int64))
    return NestedFamily(m, StripSpec(0.05), Box(3.1, 0.2), 0.2, 0.2, [lv0, lv1], [0.3, 0.01])


class TestFrostman:
    def test_single_child(self):
        fm = frostman_mass(_ring_family(1))
        assert fm.levels[1][0] == 1.0

    @pytest.mark.parametrize("n", [2, 5, 16])
    def test_equal_siblings(self, n):
        fm = frostman_mass(_ring_family(n))
        assert np.allclose(fm.levels[1], 1.0 / n, rtol=1e-14, atol=0)

    def test_desk_conservation(self, desk_mass):
        for k in range(3):
            assert abs(desk_mass.total(k) - 1.0) <= 1e-12
        assert desk_mass.conservation_residual() <= 1e-12
        assert np.all(desk_mass.levels[2] > 0)

    def test_masses_by_address(self, desk_family, desk_mass):
        mm = desk_mass.masses
        assert mm[()] == 1.0
        assert mm[desk_family.address(2, 17)] == desk_mass.levels[2][17]


class TestMassRatio:
    def test_large_ball(self, desk_family, desk_mass):
        g = GaugeFunction(2.0, 1.5)
        assert ball_mass(desk_family, desk_mass, 3.1, 1.0) == pytest.approx(1.0, abs=1e-12)
        t = 0.3
        assert ball_mass(desk_family, desk_mass, 3.1, t) / g(t) == pytest.approx(1.0 / g(t), rel=1e-12)

    def test_far_point(self, desk_family, desk_mass):
        assert ball_mass(desk_family, desk_mass, -50 + 40j, 0.1) == 0.0

    def test_baselines(self, desk_family, desk_mass):
        hi = mass_ratio_scan(desk_family, desk_mass, GaugeFunction(2.0, 1.5))
        lo = mass_ratio_scan(desk_family, desk_mass, GaugeFunction(2.0, 0.5))
        assert hi.max_ratio == pytest.approx(DESK_MASS_RATIO_G15, rel=1e-9)
        assert lo.max_ratio == pytest.approx(DESK_MASS_RATIO_G05, rel=1e-9)
        assert math.isfinite(hi.max_ratio) and hi.max_ratio > 0


class TestDivergence:
    def test_constant_at_breakpoint(self):
        eps = 0.01
        g = breakpoint_gamma(2.0, eps)
        lp = divergence_product(LAM2, g, eps, 50)
        assert np.ptp(lp) <= 1e-12

    def test_signs(self):
        up = divergence_product(LAM2, 1.2, 0.01, 100)
        down = divergence_product(LAM2, 0.9, 0.01, 100)
        assert np.all(np.diff(up) > 0)
        assert np.all(np.diff(down) < 0)

    def test_slope_oracle(self):
        assert divergence_slope(2.0, 1.2, 0.01) == pytest.approx(SLOPE_G12, rel=1e-13)
        assert divergence_slope(2.0, 0.9, 0.01) == pytest.approx(SLOPE_G09, rel=1e-13)

    @given(st.floats(0.1, 3.0), st.floats(1e-4, 0.49))
    def test_slope_law(self, gamma, eps):
        lp = divergence_product(LAM2, gamma, eps, 20)
        beta = 2.0
        step = gamma * math.log(beta) + math.log((0.5 - eps) / (1 + eps) ** 2)
        assert np.allclose(np.diff(lp), step, rtol=0, atol=1e-14 * max(1.0, abs(lp).max()))

    def test_base_term(self):
        lp = divergence_product(LAM2, 1.3, 0.01, 0)
        assert lp[0] == pytest.approx(1.3 * math.log(phi_eval(LAM2, 4.0)), rel=1e-12)

    @given(st.floats(0.05, 3.0), st.floats(1e-4, 0.49))
    def test_dichotomy_form(self, gamma, eps):
        s = divergence_slope(2.0, gamma, eps)
        threshold = 2.0 ** gamma - (1 + eps) ** 2 / (0.5 - eps)
        if abs(threshold) > 1e-9:
            assert (s > 0) == (threshold > 0)

    def test_breakpoint_limit(self):
        g = breakpoint_gamma(2.0, 1e-6)
        assert g == pytest.approx(GAMMA_STAR_1EM6, rel=1e-13)
        assert abs(g - math.log(2) / math.log(2.0)) <= 1e-5

    def test_domain(self):
        with pytest.raises(DomainError):
            divergence_product(LAM2, 1.0, 0.01, 1001)
        with pytest.raises(DomainError):
            density_factor(0.5)
        with pytest.raises(DomainError):
            divergence_product(LAM2, 0.0, 0.01, 5)
