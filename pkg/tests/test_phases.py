import numpy as np
import pytest

from phaseless.constants import DEFAULT
from phaseless.phases import (
    PhaseEstimationError,
    circular_median,
    estimate_full_phase,
    estimate_signed_phase,
    estimate_unsigned_phase,
    law_of_cosines_angle,
    round_to_phase_set,
)
from phaseless.signals import PhaseSet, circ_dist

PI = np.pi
C, C0 = DEFAULT.c, DEFAULT.c0


def full_phase_table(x, y, eps, n1=0.0, n3=0.0, c=C):
    """The 2x2 magnitude table |x + e^{i(2 c eps j + (pi/2) l)} y + n1 + n3|."""
    rots = np.exp(
        1j * (2 * c * eps * np.array([[0.0], [1.0]]) + (PI / 2) * np.array([[0.0, 1.0]]))
    )
    return np.abs(x + rots * y + n1 + n3)


class TestLawOfCosines:
    def test_right_angle(self):
        assert law_of_cosines_angle(1, 1, np.sqrt(2)) == pytest.approx(PI / 2)
        assert law_of_cosines_angle(3, 4, 5) == pytest.approx(PI / 2)

    def test_aligned_and_opposed(self):
        assert law_of_cosines_angle(1, 1, 2) == pytest.approx(0.0)
        assert law_of_cosines_angle(1, 1, 0) == pytest.approx(PI)

    def test_degenerate_magnitudes(self):
        with pytest.raises(PhaseEstimationError):
            law_of_cosines_angle(0, 1, 1)


class TestUnsigned:
    def test_zero_noise_reduction(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            theta = rng.uniform(0, 2 * PI)
            x, y = 1.0, 0.7 * np.exp(1j * theta)
            est = estimate_unsigned_phase(abs(x), abs(y), abs(x + y), eps=0.01)
            assert abs(est.theta - circ_dist(theta, 0)) < 1e-12

    def test_eps_cap(self):
        with pytest.raises(PhaseEstimationError):
            estimate_unsigned_phase(1, 1, 1, eps=0.2)

    def test_right_angle_with_noise(self):
        # x=1, y=i, all three noise terms at full allowed magnitude
        rng = np.random.default_rng(1)
        eps = 0.05
        for _ in range(10**4):
            n1, n2, n3 = eps * np.exp(1j * rng.uniform(0, 2 * PI, size=3))
            est = estimate_unsigned_phase(
                abs(1 + n1), abs(1j + n2), abs(1 + 1j + n1 + n2 + n3), eps
            )
            assert abs(est.theta - PI / 2) <= C * eps

    def test_aligned_worst_case_sqrt_bound(self):
        # theta = 0 at eps = 1/9: only the c0*sqrt(eps) clause applies
        rng = np.random.default_rng(2)
        eps = 1 / 9
        for _ in range(2000):
            n1, n2, n3 = eps * np.exp(1j * rng.uniform(0, 2 * PI, size=3))
            est = estimate_unsigned_phase(
                abs(1 + n1), abs(1 + n2), abs(2 + n1 + n2 + n3), eps
            )
            assert est.theta <= C0 * np.sqrt(eps)
            assert est.error_bound == pytest.approx(C0 * np.sqrt(eps))


class TestSigned:
    def test_orientation_noiseless(self):
        eps = 0.02
        for theta in (PI / 2, 3 * PI / 2, 1.0, 2 * PI - 1.0):
            x, y = 1.0, np.exp(1j * theta)
            s0 = abs(x + y)
            s1 = abs(x + np.exp(2j * C * eps) * y)
            est = estimate_signed_phase(abs(x), abs(y), s0, s1, eps)
            assert circ_dist(est.theta, theta) < 1e-9
            assert not est.out_of_range

    def test_random_thetas_in_range(self):
        # the c*eps claim degrades like 1/sin(theta) toward the range edges
        # (the full-circle estimator covers those with its quarter-turn
        # branch), so draw from the interior at 3x the acceptance margin
        rng = np.random.default_rng(3)
        eps = 0.02
        lo = 2 * C * eps
        bad = 0
        for _ in range(10**4):
            theta = rng.uniform(lo * 3.0, PI - lo * 3.0)
            if rng.integers(2):
                theta = 2 * PI - theta
            x, y = 1.0, 0.9 * np.exp(1j * theta)
            scale = eps * 0.9
            n1, n3 = scale * np.exp(1j * rng.uniform(0, 2 * PI, size=2))
            s0 = abs(x + y + n1 + n3)
            s1 = abs(x + np.exp(2j * C * eps) * y + n1 + n3)
            est = estimate_signed_phase(abs(x + n1), abs(y), s0, s1, eps)
            if circ_dist(est.theta, theta) > C * eps:
                bad += 1
        assert bad <= 100  # >= 99% of trials within c*eps


class TestFullCircle:
    def test_blind_spots_noiseless(self):
        eps = 0.02
        for theta in (0.0, PI, PI / 2, 3 * PI / 2, 0.3, 5.9):
            y = np.exp(1j * theta)
            tab = full_phase_table(1.0, y, eps)
            est = estimate_full_phase(1.0, 1.0, tab, eps)
            assert circ_dist(est.theta, theta) < 1e-9, theta

    def test_uniform_thetas_with_noise(self):
        rng = np.random.default_rng(4)
        eps = 0.02
        worst = 0.0
        for _ in range(10**4):
            theta = rng.uniform(0, 2 * PI)
            y = 1.3 * np.exp(1j * theta)
            n1, n3 = eps * np.exp(1j * rng.uniform(0, 2 * PI, size=2))
            tab = full_phase_table(1 + 0j, y, eps, n1, n3)
            est = estimate_full_phase(abs(1 + n1), abs(y), tab, eps)
            worst = max(worst, circ_dist(est.theta, theta))
        assert worst <= C * eps

    def test_precondition_cap(self):
        with pytest.raises(PhaseEstimationError):
            estimate_full_phase(1, 1, np.ones((2, 2)), eps=1 / 9)

    def test_error_monotone_in_eps(self):
        # empirical max error is nondecreasing in eps over a fixed noise grid
        rng = np.random.default_rng(5)
        thetas = rng.uniform(0, 2 * PI, size=500)
        phis = rng.uniform(0, 2 * PI, size=(500, 2))
        prev = 0.0
        for eps in (0.002, 0.01, 0.05):
            worst = 0.0
            for theta, (p1, p3) in zip(thetas, phis):
                y = np.exp(1j * theta)
                n1, n3 = eps * np.exp(1j * p1), eps * np.exp(1j * p3)
                tab = full_phase_table(1 + 0j, y, eps, n1, n3)
                est = estimate_full_phase(abs(1 + n1), 1.0, tab, eps)
                worst = max(worst, circ_dist(est.theta, theta))
            assert worst >= prev - 1e-12
            prev = worst

    def test_acceptance_region_cover(self):
        # every angle on a 1e-3 grid is recovered noiselessly at c*eps < pi/8
        eps = 0.02
        assert C * eps < PI / 8
        for theta in np.arange(0, 2 * PI, 1e-3):
            tab = full_phase_table(1.0, np.exp(1j * theta), eps)
            est = estimate_full_phase(1.0, 1.0, tab, eps)
            assert circ_dist(est.theta, theta) < 1e-6


class TestRounding:
    def test_round_to_phase_set(self):
        P = PhaseSet.equidistant_set(4)
        p, d = round_to_phase_set(1.6, P)
        assert p == pytest.approx(PI / 2) and d == pytest.approx(0.0292, abs=1e-4)

    def test_circular_median_basic(self):
        assert circular_median([0.1, 0.2, 0.3]) == pytest.approx(0.2)
        # samples straddling the wraparound
        med = circular_median([6.2, 0.05, 0.1])
        assert med in (pytest.approx(0.05), pytest.approx(6.2))

    def test_circular_median_within_ceps_property(self):
        # if every sample is within delta of theta, the medoid is too
        rng = np.random.default_rng(6)
        for _ in range(300):
            theta = rng.uniform(0, 2 * PI)
            delta = rng.uniform(0.001, 0.3)
            samples = theta + rng.uniform(-delta, delta, size=9)
            med = circular_median(np.mod(samples, 2 * PI))
            assert circ_dist(med, theta) <= delta + 1e-12
