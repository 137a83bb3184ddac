import numpy as np
import pytest

from phaseless.graph import (
    GraphDisconnected,
    PhaseSampleGraph,
    connectivity_threshold_check,
    dfs_propagate,
    solve_phase_prediction,
)
from phaseless.seeded import SeededStream
from phaseless.signals import PhaseSet, circ_dist, wrap_angle

PI = np.pi


def make_samples(truth, num, err_rate, P, stream, tag):
    """Uniform random pairs with oriented differences, each wrong w.p. err_rate."""
    n = len(truth)
    out = []
    for q in range(num):
        sub = stream.derive(tag, q)
        u = sub.u64(0) % n
        v = sub.u64(1) % (n - 1)
        v = v + 1 if v >= u else v
        d = wrap_angle(truth[v] - truth[u])
        if sub.uniform(2) < err_rate:
            # shift by a nonzero number of grid steps: wrong but on-grid
            m = len(P.phases)
            d = wrap_angle(d + (2 * PI / m) * (1 + sub.u64(3) % (m - 1)))
        out.append((u, v, d))
    return out


class TestDfsPropagate:
    def test_path_graph_cumsum(self):
        edges = [(0, 1, 0.5), (1, 2, 0.25), (2, 3, 1.0)]
        phases, comps = dfs_propagate(edges, 4)
        assert len(comps) == 1
        assert np.allclose(phases, [0, 0.5, 0.75, 1.75])

    def test_empty_edges_all_singletons(self):
        phases, comps = dfs_propagate([], 5)
        assert len(comps) == 5 and np.all(phases == 0)

    def test_random_connected_vs_bfs_oracle(self):
        # brute BFS oracle agrees up to per-component rotation
        s = SeededStream(0, "dfs")
        for trial in range(20):
            n = 12
            truth = s.phase_array(np.arange(n, dtype=np.uint64), trial)
            edges = []
            perm = s.permutation(n, trial, 99)
            for a, b in zip(perm, perm[1:]):  # spanning path + extras
                edges.append((int(a), int(b), wrap_angle(truth[b] - truth[a])))
            for j in range(n):
                u, v = s.u64(trial, j, 0) % n, s.u64(trial, j, 1) % n
                if u != v:
                    edges.append((u, v, wrap_angle(truth[v] - truth[u])))
            phases, comps = dfs_propagate(edges, n)
            assert len(comps) == 1
            diff = wrap_angle(phases - truth)
            assert circ_dist(diff, diff[0]).max() < 1e-9


class TestPhasePrediction:
    def test_exact_samples_spanning_tree(self):
        truth = np.array([0.0, PI / 2, PI, 3 * PI / 2, PI / 2])
        P = PhaseSet.equidistant_set(4)
        samples = [(i, i + 1, wrap_angle(truth[i + 1] - truth[i])) for i in range(4)]
        samples += [(0, 2, wrap_angle(truth[2] - truth[0]))] * 3
        g = PhaseSampleGraph(5, samples, P)
        got = solve_phase_prediction(g)
        diff = wrap_angle(got - truth)
        assert circ_dist(diff, diff[0]).max() < 1e-9

    def test_two_vertices_plurality(self):
        P = PhaseSet.equidistant_set(4)
        g = PhaseSampleGraph(2, [(0, 1, PI / 2), (0, 1, PI / 2), (0, 1, PI)], P)
        got = solve_phase_prediction(g)
        assert circ_dist(wrap_angle(got[1] - got[0]), PI / 2) < 1e-9

    def test_disconnected_raises(self):
        g = PhaseSampleGraph(4, [(0, 1, 0.0)], PhaseSet.equidistant_set(2))
        with pytest.raises(GraphDisconnected):
            solve_phase_prediction(g)

    def test_error_rate_one_third_full_recovery(self):
        # calibration gate for the sample-count constant at n=64
        from phaseless.constants import DEFAULT

        c_sp = DEFAULT.mod("graph")["c_SP"]
        n = 64
        P = PhaseSet.equidistant_set(4)
        s = SeededStream(7, "pp")
        num = int(c_sp * n * np.log2(n))
        ok = 0
        runs = 50
        for t in range(runs):
            truth = P.phases[(s.u64_array(np.arange(n, dtype=np.uint64), t, 5) % 4).astype(int)]
            samples = make_samples(truth, num, 1 / 3, P, s, f"s{t}")
            got = solve_phase_prediction(PhaseSampleGraph(n, samples, P))
            diff = wrap_angle(got - truth)
            ok += int(circ_dist(diff, diff[0]).max() < 1e-9)
        assert ok >= int(0.95 * runs)


class TestConnectivity:
    def test_two_vertices_one_sample(self):
        assert connectivity_threshold_check(2, 1, trials=50, seed=1) == 1.0

    def test_zero_samples_never(self):
        assert connectivity_threshold_check(8, 0, trials=20, seed=2) == 0.0

    def test_threshold_at_c2(self):
        n = 256
        num = int(2 * n * np.log2(n))
        rate = connectivity_threshold_check(n, num, trials=200, seed=3)
        assert rate >= 0.999
