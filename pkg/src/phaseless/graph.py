"""Relative-phase recovery on graphs of noisy pairwise estimates.

Two regimes: offsets assumed correct (plain DFS propagation, used for
noiseless stitching and bucket combination) and offsets correct only with
probability >= 2/3 (plurality voting around a high-degree anchor with
consistency sweeps, used inside buckets).
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .constants import DEFAULT
from .seeded import SeededStream
from .signals import TWO_PI, circ_dist, wrap_angle


class GraphDisconnected(RuntimeError):
    """Evidence graph does not reach every vertex."""


@dataclass
class PhaseSampleGraph:
    """Noisy oriented phase-difference samples over n vertices.

    Each sample (u, v, d) estimates phase(v) - phase(u) mod 2*pi and may be
    wrong (arbitrarily) with constant probability.  ``phase_set`` enables
    exact plurality voting on the valid-phase grid; without it estimates are
    clustered with a circular tolerance before voting.
    """

    n: int
    samples: list  # (u, v, oriented estimate)
    phase_set: object | None = None
    cluster_tol: float = 0.05


def _plurality(values, phase_set, tol):
    """Most frequent value, on the phase grid or by tolerance clustering."""
    if phase_set is not None:
        idx = phase_set.index_of(np.asarray(values))
        counts = np.bincount(idx, minlength=len(phase_set.phases))
        return float(phase_set.phases[int(np.argmax(counts))])
    vals = np.sort(wrap_angle(np.asarray(values, dtype=np.float64)))
    best_val, best_count = float(vals[0]), 0
    for v in vals:
        inside = circ_dist(vals, v) <= tol
        c = int(inside.sum())
        if c > best_count:
            best_count, best_val = c, float(np.median(vals[inside]))
    return best_val


def solve_phase_prediction(g: PhaseSampleGraph, consts=None) -> np.ndarray:
    """Assign phases to all vertices (anchor at 0) from noisy pair samples.

    Anchor at the max-degree vertex; each other vertex takes the plurality
    over direct samples to the anchor plus all two-hop compositions; then up
    to ``max_sweeps`` global re-voting passes against the current assignment.
    Raises GraphDisconnected when some vertex has no one- or two-hop
    evidence connecting it to the anchor.
    """
    cfg = (consts or DEFAULT).mod("graph")
    n = g.n
    if n == 0:
        return np.zeros(0)
    adj = defaultdict(list)  # u -> list of (v, oriented offset u->v)
    deg = np.zeros(n, dtype=np.int64)
    for u, v, d in g.samples:
        if u == v:
            continue
        d = float(d)
        adj[u].append((v, d))
        adj[v].append((u, -d))
        deg[u] += 1
        deg[v] += 1
    anchor = int(np.argmax(deg))
    tol = g.cluster_tol

    phases = np.zeros(n)
    have = np.zeros(n, dtype=bool)
    have[anchor] = True

    # one-hop evidence plus compositions through each middle vertex
    evidence = defaultdict(list)  # v -> candidate offsets anchor->v
    for v, d1 in adj[anchor]:
        evidence[v].append(d1)
    for w, d1 in adj[anchor]:
        for v, d2 in adj[w]:
            if v != anchor:
                evidence[v].append(d1 + d2)
    for v in range(n):
        if v == anchor:
            continue
        if not evidence[v]:
            raise GraphDisconnected(f"vertex {v} has no evidence path to the anchor")
        phases[v] = _plurality(wrap_angle(np.array(evidence[v])), g.phase_set, tol)
        have[v] = True

    for _ in range(int(cfg["max_sweeps"])):
        changed = False
        for v in range(n):
            if v == anchor or not adj[v]:
                continue
            # adj[v] holds (u, offset v->u = phase(u)-phase(v))
            votes = wrap_angle(np.array([phases[u] - d for u, d in adj[v]]))
            new = _plurality(votes, g.phase_set, tol)
            if circ_dist(new, phases[v]) > 1e-12:
                phases[v] = new
                changed = True
        if not changed:
            break
    return wrap_angle(phases - phases[anchor])


def dfs_propagate(edges, n: int):
    """Propagate exact offsets (u, v, phase(v)-phase(u)) over components.

    Returns (assignment, components): each component's root sits at phase 0;
    disconnection is reported, not raised.
    """
    adj = defaultdict(list)
    for u, v, d in edges:
        adj[u].append((v, float(d)))
        adj[v].append((u, -float(d)))
    phases = np.zeros(n)
    comp = -np.ones(n, dtype=np.int64)
    components = []
    two_pi = 2.0 * np.pi
    for root in range(n):
        if comp[root] >= 0:
            continue
        cid = len(components)
        members = []
        stack = [(root, 0.0)]
        comp[root] = cid
        while stack:
            u, ph = stack.pop()
            phases[u] = ph
            members.append(u)
            for v, d in adj[u]:
                if comp[v] < 0:
                    comp[v] = cid
                    stack.append((v, (ph + d) % two_pi))
        components.append(members)
    return wrap_angle(phases), components


class _DSU:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb
            return True
        return False


def connectivity_threshold_check(n: int, num_samples: int, trials: int = 100, seed: int = 0) -> float:
    """Empirical P[connected] for uniform random distinct-pair samples.

    Used to calibrate the edge-count constant for stitching graphs.
    """
    if n == 1:
        return 1.0
    s = SeededStream(seed, "connectivity")
    hits = 0
    for t in range(trials):
        us = s.u64_array(np.arange(num_samples, dtype=np.uint64), t, 0) % np.uint64(n)
        vs = s.u64_array(np.arange(num_samples, dtype=np.uint64), t, 1) % np.uint64(n - 1)
        us = us.astype(np.int64)
        vs = vs.astype(np.int64)
        vs = np.where(vs >= us, vs + 1, vs)  # distinct pairs, uniform
        dsu = _DSU(n)
        merged = 1
        for u, v in zip(us.tolist(), vs.tolist()):
            if dsu.union(u, v):
                merged += 1
                if merged == n:
                    break
        hits += int(merged == n)
    return hits / trials
