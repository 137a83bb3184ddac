import numpy as np
import pytest

from phaseless import AlignmentFailure
from phaseless.constants import DEFAULT
from phaseless.linf import LinfEnsemble, compute_L, corollary_l2_decode, linf_decode
from phaseless.signals import (
    PhaseSet,
    SignalSpec,
    generate,
    head_indices,
    phase_error,
    tail_norm,
)

PI = np.pi
P4 = PhaseSet.equidistant_set(4)


def small_consts():
    c = DEFAULT.copy()
    c.modules["linf"].update({"C_B": 4.0, "reps": 5, "C_cs": 0.5})
    return c


def planted(n, k, seed, sigma=0.05):
    spec = SignalSpec(n=n, k=k, phase_set=P4, magnitude_range=(1.0, 2.0),
                      tail_model="gaussian" if sigma else "zero",
                      tail_param=sigma, seed=seed)
    return generate(spec)


class TestMeasurement:
    def test_zero_signal(self):
        ens = LinfEnsemble(64, 2, P4, seed=1, consts=small_consts())
        y = ens.measure(np.zeros(64, dtype=complex), lazy=False)
        assert y.concat().max() == 0.0

    def test_rotation_invariance(self):
        ens = LinfEnsemble(64, 2, P4, seed=2, consts=small_consts())
        rng = np.random.default_rng(0)
        x = rng.normal(size=64) + 1j * rng.normal(size=64)
        a = ens.measure(x, lazy=False).concat()
        b = ens.measure(x * np.exp(0.9j), lazy=False).concat()
        assert np.allclose(a, b, atol=1e-10)

    def test_dense_oracle_equality(self):
        ens = LinfEnsemble(128, 2, P4, seed=3, consts=small_consts())
        rng = np.random.default_rng(1)
        x = rng.normal(size=128) + 1j * rng.normal(size=128)
        y = ens.measure(x, lazy=False).concat()
        assert len(y) == ens.m
        assert np.allclose(y, np.abs(ens.dense() @ x), atol=1e-9)

    def test_lazy_blocks_match_eager(self):
        ens = LinfEnsemble(64, 2, P4, seed=4, consts=small_consts())
        x = planted(64, 2, seed=9, sigma=0.0).values
        y_lazy = ens.measure(x)
        y_full = ens.measure(x, lazy=False)
        nl = y_lazy.lazy["nl"]()
        for name, arr in nl.blocks.items():
            assert np.array_equal(arr, y_full[f"nl_{name}"])


class TestComputeL:
    def test_zero_signal(self):
        ens = LinfEnsemble(64, 2, P4, seed=5, consts=small_consts())
        assert compute_L(ens.measure(np.zeros(64, complex), lazy=False)) == 0.0

    def test_sparse_signal_missing_mask(self):
        # exactly sparse signal whose support avoids the pivot mask: L = 0
        n = 256
        ens = LinfEnsemble(n, 4, P4, seed=6)
        x = planted(n, 4, seed=11, sigma=0.0).values
        if np.any(ens.eta[np.nonzero(x)[0]]):
            pytest.skip("support intersects mask for this seed")
        assert compute_L(ens.measure(x)) == 0.0

    def test_sandwich_monte_carlo(self):
        # calibrated C1, C2: tail_{C2 k}^2/(C1 k) <= L^2 <= tail_k^2/(2k)
        n, k = 1024, 8
        cfg = DEFAULT.mod("linf")
        C1, C2 = cfg["C1"], cfg["C2"]
        hits = 0
        trials = 2000
        for t in range(trials):
            x = planted(n, k, seed=t, sigma=0.05)
            ens = LinfEnsemble(n, k, P4, seed=40000 + t)
            L2 = compute_L(ens.measure(x.values)) ** 2
            lo = tail_norm(x, C2 * k, 2) ** 2 / (C1 * k)
            hi = tail_norm(x, k, 2) ** 2 / (2 * k)
            hits += int(lo <= L2 <= hi)
        assert hits / trials >= 0.635


class TestDecode:
    def test_exactly_sparse_exact_recovery(self):
        # zero tail: whenever the guarantee holds it means exact recovery,
        # and it holds well above the 0.6 theorem floor (a head landing in
        # the pivot mask is the main legitimate failure mode)
        n, k = 512, 4
        wins = 0
        trials = 40
        for t in range(trials):
            x = planted(n, k, seed=t, sigma=0.0)
            ens = LinfEnsemble(n, k, P4, seed=7000 + t)
            try:
                xh, diag = linf_decode(ens.measure(x.values), ens)
            except Exception:
                continue
            err = phase_error(x, xh.to_dense(n), "l2")
            if err < 1e-9 * np.linalg.norm(x.values):
                wins += 1
                # exactness, not approximation: the error is at float level
                assert err < 1e-10 * np.linalg.norm(x.values)
        assert wins >= 0.6 * trials

    def test_linf_guarantee_monte_carlo(self):
        n, k = 1024, 8
        wins = 0
        trials = 100
        for t in range(trials):
            x = planted(n, k, seed=t)
            ens = LinfEnsemble(n, k, P4, seed=50000 + t)
            try:
                xh, _ = linf_decode(ens.measure(x.values), ens)
                err = phase_error(x, xh.to_dense(n), "linf")
                wins += int(err <= tail_norm(x, k, 2) / np.sqrt(k))
            except Exception:
                pass
        assert wins >= 0.60 * trials  # theorem floor; typically ~0.95

    def test_s_prime_containment(self):
        # every i with |x_i|^2 >= tail^2/k lands in S' (Lemma floor 0.63)
        n, k = 1024, 8
        hits = 0
        trials = 300
        for t in range(trials):
            x = planted(n, k, seed=t)
            ens = LinfEnsemble(n, k, P4, seed=60000 + t)
            y = ens.measure(x.values)
            S = ens.hh.identify(y)
            mags = np.atleast_1d(ens.cs.point_query(y, S))
            L = compute_L(y)
            S_prime = set(S[mags >= L].tolist())
            t2 = tail_norm(x, k, 2) ** 2
            musts = [i for i in np.nonzero(np.abs(x.values) ** 2 >= t2 / k)[0]]
            hits += int(all(i in S_prime for i in musts))
        assert hits / trials >= 0.63

    def test_phases_exact_on_grid(self):
        # accepted alignments place every output phase exactly on the grid
        n, k = 1024, 8
        x = planted(n, k, seed=3)
        ens = LinfEnsemble(n, k, P4, seed=71)
        xh, diag = linf_decode(ens.measure(x.values), ens)
        ang = np.mod(np.angle(xh.values), 2 * PI)
        for a in ang:
            assert min(abs(a - p) % (2 * PI) for p in P4.phases.tolist() + [2 * PI]) < 1e-9

    def test_rounding_radius_assertion(self):
        # 2 c eps < eta / 2 by construction for every eta
        for m in (2, 3, 4, 8):
            P = PhaseSet.equidistant_set(m)
            ens = LinfEnsemble(64, 2, P, seed=8, consts=small_consts())
            assert 2 * ens.c * ens.eps < P.eta / 2

    def test_corollary_wrapper(self):
        n, k = 512, 2
        x = planted(n, k, seed=5, sigma=0.0)
        (xh, diag), ens = corollary_l2_decode(n, k, 0.5, P4, x.values, seed=91)
        err = phase_error(x, xh.to_dense(n), "l2")
        assert err <= (1 + 0.5) * tail_norm(x, k, 2) + 1e-9 * np.linalg.norm(x.values)
