"""Kernel and spectral-measure tests.

Frozen expected values were computed independently with mpmath (30 digits)
before the implementation existed; quadrature cross-checks use scipy.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from fbmarkov import (
    AtomicMeasure,
    DomainError,
    HurstKernelParams,
    NotSquareIntegrableError,
    ParameterError,
    PowerLawMeasure,
    UnsupportedMeasureError,
    check_admissibility,
    kernel_from_measure,
    l2_norm,
    parse_measure,
    power_kernel_eval,
    spectral_density,
)

# mpmath oracles, 17 significant digits
INV_GAMMA_075 = 0.81604893909826298
POW_075_AT_16 = 0.40802446954913149
SIN_075PI_OVER_PI = 0.22507907903927652
DENSITY_075_AT_16 = 0.028134884879909565
L2_TWO_ATOMS = 1.0801234497346434  # sqrt(7/6)


class TestHurstKernelParams:
    def test_from_alpha_roundtrip(self):
        p = HurstKernelParams.from_alpha(0.75)
        assert p.hurst == 0.25
        assert p.alpha - p.hurst == 0.5

    def test_brownian_limit_allowed(self):
        p = HurstKernelParams.from_hurst(0.5)
        assert p.alpha == 1.0

    @pytest.mark.parametrize("alpha", [0.5, 0.3, 1.2, -0.1])
    def test_alpha_out_of_range(self, alpha):
        with pytest.raises(ParameterError):
            HurstKernelParams.from_alpha(alpha)

    def test_inconsistent_pair_rejected(self):
        with pytest.raises(ParameterError):
            HurstKernelParams(hurst=0.25, alpha=0.8)


class TestPowerKernel:
    def test_alpha_one_is_constant(self):
        p = HurstKernelParams.from_alpha(1.0)
        assert power_kernel_eval(p, 5.0) == 1.0

    def test_value_at_one(self):
        p = HurstKernelParams.from_alpha(0.75)
        assert power_kernel_eval(p, 1.0) == pytest.approx(INV_GAMMA_075, rel=1e-12)

    def test_power_law_decay(self):
        p = HurstKernelParams.from_alpha(0.75)
        assert power_kernel_eval(p, 16.0) == pytest.approx(POW_075_AT_16, rel=1e-12)
        ratio = power_kernel_eval(p, 16.0) / power_kernel_eval(p, 1.0)
        assert ratio == pytest.approx(16.0 ** -0.25, rel=1e-12)

    def test_diverges_near_zero(self):
        p = HurstKernelParams.from_alpha(0.6)
        assert power_kernel_eval(p, 1e-12) > power_kernel_eval(p, 1e-6) > 1.0

    def test_domain_error(self):
        p = HurstKernelParams.from_alpha(0.75)
        with pytest.raises(DomainError):
            power_kernel_eval(p, 0.0)
        with pytest.raises(DomainError):
            power_kernel_eval(p, -1.0)


class TestKernelFromMeasure:
    def test_single_atom(self):
        m = AtomicMeasure.from_pairs([(1.0, 1.0)])
        assert kernel_from_measure(m, 0.5) == pytest.approx(
            0.60653065971263342, rel=1e-14
        )

    def test_atom_sum_small_u_limit(self):
        m = AtomicMeasure.from_pairs([(1.0, 2.0), (3.0, 1.0)])
        assert kernel_from_measure(m, 1e-12) == pytest.approx(3.0, rel=1e-9)

    def test_power_law_matches_closed_form(self):
        m = PowerLawMeasure(0.75)
        assert kernel_from_measure(m, 1.0) == pytest.approx(INV_GAMMA_075, rel=1e-8)

    @pytest.mark.parametrize("alpha", [0.55, 0.6, 0.75, 0.9, 0.95])
    def test_laplace_consistency(self, alpha):
        # pins the density normalization sin(pi a)/pi on a log grid
        m = PowerLawMeasure(alpha)
        p = HurstKernelParams.from_alpha(alpha)
        for u in np.logspace(-3, 1, 9):
            ref = power_kernel_eval(p, float(u))
            assert kernel_from_measure(m, float(u)) == pytest.approx(ref, rel=1e-6)

    @pytest.mark.parametrize(
        "measure",
        [
            PowerLawMeasure(0.6),
            AtomicMeasure.from_pairs([(0.5, 1.0), (2.0, 0.3)]),
        ],
    )
    def test_positive_and_strictly_decreasing(self, measure):
        grid = np.logspace(-3, 1, 40)
        vals = [kernel_from_measure(measure, float(u)) for u in grid]
        assert all(v > 0.0 for v in vals)
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_domain_error(self):
        with pytest.raises(DomainError):
            kernel_from_measure(PowerLawMeasure(0.75), 0.0)


class TestSpectralDensity:
    def test_at_one(self):
        m = PowerLawMeasure(0.75)
        assert spectral_density(m, 1.0) == pytest.approx(SIN_075PI_OVER_PI, rel=1e-12)

    def test_at_sixteen(self):
        m = PowerLawMeasure(0.75)
        assert spectral_density(m, 16.0) == pytest.approx(DENSITY_075_AT_16, rel=1e-12)

    def test_alpha_near_half(self):
        m = PowerLawMeasure(0.5 + 1e-9)
        assert spectral_density(m, 1.0) == pytest.approx(1.0 / math.pi, rel=1e-6)

    def test_atomic_unsupported(self):
        with pytest.raises(UnsupportedMeasureError):
            spectral_density(AtomicMeasure.from_pairs([(1.0, 1.0)]), 1.0)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            spectral_density(PowerLawMeasure(0.75), 0.0)


class TestL2Norm:
    def test_single_atom(self):
        m = AtomicMeasure.from_pairs([(1.0, 1.0)])
        assert l2_norm(m) == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-14)
        m2 = AtomicMeasure.from_pairs([(4.0, 1.0)])
        assert l2_norm(m2) == pytest.approx(1.0 / math.sqrt(8.0), rel=1e-14)

    def test_two_atoms(self):
        m = AtomicMeasure.from_pairs([(1.0, 1.0), (3.0, 1.0)])
        assert l2_norm(m) == pytest.approx(L2_TWO_ATOMS, rel=1e-12)

    @pytest.mark.parametrize(
        "pairs",
        [
            [(1.0, 1.0)],
            [(1.0, 1.0), (3.0, 0.5)],
            [(0.2, 2.0), (1.0, 1.0), (7.0, 0.1)],
        ],
    )
    def test_matches_direct_kernel_quadrature(self, pairs):
        # independent oracle: integrate the squared exponential mixture
        m = AtomicMeasure.from_pairs(pairs)
        x = np.array(m.locations)
        w = np.array(m.masses)
        val, _ = quad(
            lambda u: float(np.sum(w * np.exp(-x * u))) ** 2,
            0.0,
            np.inf,
            epsabs=1e-14,
            epsrel=1e-13,
        )
        assert l2_norm(m) ** 2 == pytest.approx(val, rel=1e-10)

    def test_power_law_rejected(self):
        with pytest.raises(NotSquareIntegrableError):
            l2_norm(PowerLawMeasure(0.75))


class TestAdmissibility:
    def test_atomic_all_true(self):
        report = check_admissibility(AtomicMeasure.from_pairs([(1.0, 1.0)]), p=2.0)
        assert report.condition_10 and report.condition_prop2
        assert report.l2_norm_finite

    def test_atomic_brute_force_agreement(self):
        # evaluate the defining integrals directly on the atoms
        m = AtomicMeasure.from_pairs([(0.01, 1.0), (1.0, 2.0), (50.0, 0.5)])
        x = np.array(m.locations)
        w = np.array(m.masses)
        p = 1.7
        report = check_admissibility(m, p=p)
        assert report.condition_10 == bool(
            np.isfinite(np.sum(w * np.minimum(1.0, x ** -0.5)))
        )
        assert report.condition_prop2 == bool(
            np.isfinite(np.sum(w * np.maximum(x ** (-p / 2), x ** -0.5)))
        )

    def test_power_law_prop2_fails(self):
        report = check_admissibility(PowerLawMeasure(0.75), p=2.0)
        assert report.condition_10
        assert not report.condition_prop2  # 0.75 + 1 >= 1
        assert not report.l2_norm_finite

    @pytest.mark.parametrize("p", [1.5, 1.2])
    def test_power_law_prop2_fails_all_p(self, p):
        # alpha + p/2 >= 1 for every p > 1 when alpha > 1/2
        report = check_admissibility(PowerLawMeasure(0.6), p=p)
        assert report.condition_10
        assert not report.condition_prop2

    def test_p_must_exceed_one(self):
        with pytest.raises(ParameterError):
            check_admissibility(AtomicMeasure.from_pairs([(1.0, 1.0)]), p=1.0)


class TestMeasureValidation:
    def test_nonpositive_location(self):
        with pytest.raises(ParameterError):
            AtomicMeasure.from_pairs([(0.0, 1.0)])

    def test_nonpositive_mass(self):
        with pytest.raises(ParameterError):
            AtomicMeasure.from_pairs([(1.0, 0.0)])

    def test_unsorted_constructor_rejected(self):
        with pytest.raises(ParameterError):
            AtomicMeasure(locations=(3.0, 1.0), masses=(1.0, 1.0))

    def test_from_pairs_sorts(self):
        m = AtomicMeasure.from_pairs([(3.0, 0.5), (1.0, 1.0)])
        assert m.locations == (1.0, 3.0)
        assert m.masses == (1.0, 0.5)

    def test_power_law_alpha_range(self):
        with pytest.raises(ParameterError):
            PowerLawMeasure(0.5)
        with pytest.raises(ParameterError):
            PowerLawMeasure(1.0)


class TestParseMeasure:
    def test_power(self):
        m = parse_measure("power:0.75")
        assert isinstance(m, PowerLawMeasure) and m.alpha == 0.75

    def test_atoms(self):
        m = parse_measure("atoms:1.0*1.0,3.0*0.5")
        assert isinstance(m, AtomicMeasure)
        assert m.locations == (1.0, 3.0)
        assert m.masses == (1.0, 0.5)

    @pytest.mark.parametrize(
        "spec", ["power", "gauss:1", "atoms:1.0", "atoms:a*b", "power:x"]
    )
    def test_bad_specs(self, spec):
        with pytest.raises(ParameterError):
            parse_measure(spec)
