import numpy as np
import pytest

from phaseless.signals import ComplexSignal, PhaseSet, SignalSpec, generate, head_indices, tail_norm
from phaseless.sketches import CountMinEnsemble, CountSketchEnsemble, HHEnsemble

PI = np.pi


def planted(n, k, seed, tail_sigma=0.05, mag=(1.0, 2.0), m_phases=4):
    spec = SignalSpec(
        n=n, k=k, phase_set=PhaseSet.equidistant_set(m_phases),
        magnitude_range=mag,
        tail_model="gaussian" if tail_sigma else "zero",
        tail_param=tail_sigma, seed=seed,
    )
    return generate(spec)


class TestCountSketch:
    def test_unit_spike(self):
        ens = CountSketchEnsemble(64, K=4, seed=1)
        x = np.zeros(64, dtype=complex)
        x[17] = 1.0
        y = ens.measure(x.copy())
        blk = y["cs"]
        for r in range(ens.reps):
            b = ens._h[r, 17]
            assert blk[r, b] == pytest.approx(1.0)
            assert np.delete(blk[r], b).max() == 0.0

    def test_zero_signal(self):
        ens = CountSketchEnsemble(32, K=2, seed=2)
        assert ens.measure(np.zeros(32, dtype=complex)).concat().max() == 0.0

    def test_matches_dense_oracle(self):
        ens = CountSketchEnsemble(128, K=4, seed=3)
        rng = np.random.default_rng(0)
        x = rng.normal(size=128) + 1j * rng.normal(size=128)
        assert np.allclose(ens.measure(x).concat(), np.abs(ens.dense() @ x), atol=1e-12)

    def test_phase_invariance(self):
        ens = CountSketchEnsemble(64, K=4, seed=4)
        rng = np.random.default_rng(1)
        x = rng.normal(size=64) + 1j * rng.normal(size=64)
        y1 = ens.measure(x).concat()
        y2 = ens.measure(x * np.exp(0.7j)).concat()
        assert np.allclose(y1, y2, atol=1e-12)

    def test_exact_on_one_sparse(self):
        ens = CountSketchEnsemble(256, K=4, seed=5)
        x = np.zeros(256, dtype=complex)
        x[100] = 5.0 * np.exp(1.1j)
        assert ens.point_query(ens.measure(x), 100) == pytest.approx(5.0)
        assert ens.point_query(ens.measure(np.zeros(256, dtype=complex)), 100) == 0.0

    def test_magnitude_error_bound_monte_carlo(self):
        # |x_i| estimate error^2 <= (eps/(C k)) * tail^2 in >= 99% of trials
        n, k, eps, C = 512, 8, 0.5, 4
        K = int(C * k / eps)
        good = 0
        trials = 300
        for t in range(trials):
            x = planted(n, k, seed=t, tail_sigma=0.05)
            ens = CountSketchEnsemble(n, K=K, seed=1000 + t, reps=32)
            y = ens.measure(x.values)
            bound = np.sqrt(eps / (C * k)) * tail_norm(x, k, 2)
            heads = head_indices(x, k)
            est = ens.point_query(y, heads)
            good += int(np.all(np.abs(est - np.abs(x.values[heads])) <= bound))
        assert good >= 0.99 * trials


class TestHeavyHitters:
    def test_exactly_sparse_recall(self):
        n, k = 1024, 8
        hits = 0
        for t in range(200):
            x = planted(n, k, seed=t, tail_sigma=0.0)
            ens = HHEnsemble(n, K=k, seed=t)
            S = ens.identify(ens.measure(x.values))
            assert len(S) <= ens.out_size
            hits += int(np.all(np.isin(head_indices(x, k), S)))
        assert hits == 200

    def test_zero_signal_size_contract(self):
        ens = HHEnsemble(256, K=4, seed=9)
        S = ens.identify(ens.measure(np.zeros(256, dtype=complex)))
        assert len(S) <= ens.out_size

    def test_recall_with_tail(self):
        # heads 10x tail RMS: recall of the full head set >= 99%
        n, k = 1024, 8
        hits = 0
        for t in range(200):
            x = planted(n, k, seed=5000 + t, tail_sigma=0.1)
            ens = HHEnsemble(n, K=k, seed=77 + t)
            S = ens.identify(ens.measure(x.values))
            hits += int(np.all(np.isin(head_indices(x, k), S)))
        assert hits >= 198

    def test_matches_dense(self):
        ens = HHEnsemble(128, K=4, seed=11)
        rng = np.random.default_rng(3)
        x = rng.normal(size=128) + 1j * rng.normal(size=128)
        assert np.allclose(ens.measure(x).concat(), np.abs(ens.dense() @ x), atol=1e-10)


class TestCountMin:
    def test_one_sparse_full_candidates(self):
        n = 512
        x = np.zeros(n)
        x[77] = 3.0
        ens = CountMinEnsemble(n, k=4, eps=0.5, seed=21)
        S = ens.identify(ens.measure(x))
        assert 77 in S

    def test_empty_candidates(self):
        ens = CountMinEnsemble(128, k=2, eps=0.5, seed=22)
        y = ens.measure(np.abs(np.random.default_rng(0).normal(size=128)))
        assert len(ens.identify(y, candidates=np.array([], dtype=np.int64))) == 0

    def test_negative_signal_rejected(self):
        ens = CountMinEnsemble(64, k=2, eps=0.5, seed=23)
        bad = np.zeros(64)
        bad[3] = -1.0
        with pytest.raises(ValueError):
            ens.measure(bad)

    def test_power_law_recall(self):
        # all (k,eps) l1-heavy hitters recovered, 200 trials
        n, k, eps = 1024, 8, 0.25
        hits = 0
        for t in range(200):
            spec = SignalSpec(
                n=n, k=k, phase_set=PhaseSet([0.0], eta=2 * PI),
                magnitude_range=(2.0, 4.0), tail_model="power_law",
                tail_param=0.7, tail_scale=1.0, nonnegative=True, seed=t,
            )
            x = generate(spec)
            ens = CountMinEnsemble(n, k=k, eps=eps, seed=31 + t)
            y = ens.measure(x.values.real)
            S = ens.identify(y)
            assert len(S) <= ens.cap
            t1 = tail_norm(x, k, 1)
            heavy = np.nonzero(x.values.real > (eps / k) * t1)[0]
            hits += int(np.all(np.isin(heavy, S)))
        assert hits == 200

    def test_matches_dense(self):
        ens = CountMinEnsemble(128, k=4, eps=0.5, seed=41)
        x = np.abs(np.random.default_rng(5).normal(size=128))
        assert np.allclose(ens.measure(x).concat(), np.abs(ens.dense() @ x), atol=1e-12)
