"""Uniform l1/l1 recovery for nonnegative real signals.

For x >= 0 and a 0/1 sensing matrix, |Phi x| = Phi x, so phaseless
measurements carry full linear information and classical identification
machinery applies.  Identification splits coordinate indices in half by
their bit patterns, recursively finds heavy candidates of the two
aggregated signals, and intersects the cross product through a final
filter.  Estimation uses a d-regular bucket ensemble with median-of-
neighbour counters inside an iterative residual loop whose residual
measurements are computed internally (never re-measured through |.|).
"""

from __future__ import annotations

import numpy as np

from .constants import DEFAULT
from .measurements import PhaselessMeasurements
from .seeded import HashFamily, as_stream
from .signals import ConfigError, SparseApprox
from .sketches import CountMinEnsemble


def bit_split(i: int, n: int, half: str) -> int:
    """MSB-first bit split of an index: 'first' = high bits, 'sec' = low bits."""
    b = int(n).bit_length() - 1
    if (1 << b) != n:
        raise ConfigError("bit splitting requires n to be a power of two")
    hi = (b + 1) // 2  # ceil(b/2) most significant bits
    if half == "first":
        return int(i) >> (b - hi)
    if half == "sec":
        return int(i) & ((1 << (b - hi)) - 1)
    raise ValueError("half must be 'first' or 'sec'")


class _Node:
    """A contiguous MSB-first bit range [s, e) of the index space."""

    def __init__(self, s: int, e: int):
        self.s, self.e = s, e
        self.bits = e - s
        self.dim = 1 << self.bits
        self.left = self.right = None
        self.cm = None

    @property
    def key(self) -> str:
        return f"node_{self.s}_{self.e}"


class L1Ensemble:
    def __init__(self, n: int, k: int, eps: float, seed, consts=None):
        consts = consts or DEFAULT
        cfg = consts.mod("l1")
        b = int(n).bit_length() - 1
        if (1 << b) != n:
            raise ConfigError("n must be a power of two (pad the signal)")
        self.n, self.k, self.eps = int(n), int(k), float(eps)
        self.cfg = dict(cfg)
        self.stream = as_stream(seed, "l1")
        stop = max(64, k * k)

        def build(s, e):
            node = _Node(s, e)
            node.cm = CountMinEnsemble(
                node.dim, k, eps, seed=self.stream.derive("cm", s, e)
            )
            if node.dim > stop:
                mid = s + (e - s + 1) // 2  # first ceil(bits/2) bits
                node.left = build(s, mid)
                node.right = build(mid, e)
            return node

        self.root = build(0, b)
        self.est_reps = int(cfg["est_reps"])
        self.est_buckets = max(2, int(np.ceil(cfg["est_bucket_factor"] * k / eps**2)))
        self.est_hashes = [
            HashFamily.from_stream(self.stream, 2, n, self.est_buckets, 9, r)
            for r in range(self.est_reps)
        ]
        self._est_h = np.stack([h.eval_array(np.arange(n)) for h in self.est_hashes])

    def _nodes(self):
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            out.append(node)
            if node.left is not None:
                stack.extend([node.right, node.left])
        return out

    @property
    def m(self) -> int:
        return sum(nd.cm.m for nd in self._nodes()) + self.est_reps * self.est_buckets

    def _aggregate(self, x, node):
        b = int(self.n).bit_length() - 1
        j = (np.arange(self.n, dtype=np.int64) >> (b - node.e)) & (node.dim - 1)
        agg = np.zeros(node.dim)
        np.add.at(agg, j, x)
        return agg

    def measure(self, x: np.ndarray) -> PhaselessMeasurements:
        x = np.asarray(x)
        if len(x) != self.n:
            raise ValueError("dimension mismatch")
        if np.any(np.asarray(x).real < -1e-12) or np.any(np.abs(np.asarray(x).imag) > 1e-12):
            raise ValueError("l1 scheme requires nonnegative real signals")
        xr = np.maximum(np.asarray(x).real, 0.0)
        blocks = {}
        for node in self._nodes():
            sub = self._aggregate(xr, node) if node.bits < int(self.n).bit_length() - 1 else xr
            for name, arr in node.cm.measure(sub).blocks.items():
                blocks[f"{node.key}_{name}"] = arr
        est = np.empty((self.est_reps, self.est_buckets))
        for r in range(self.est_reps):
            acc = np.zeros(self.est_buckets)
            np.add.at(acc, self._est_h[r], xr)
            est[r] = acc
        blocks["est"] = est
        return PhaselessMeasurements(blocks)

    def dense(self) -> np.ndarray:
        b = int(self.n).bit_length() - 1
        idx = np.arange(self.n, dtype=np.int64)
        rows = []
        for node in self._nodes():
            j = (idx >> (b - node.e)) & (node.dim - 1)
            lift = np.zeros((node.dim, self.n))
            lift[j, idx] = 1.0
            rows.append(node.cm.dense().real @ lift)
        for r in range(self.est_reps):
            d = np.zeros((self.est_buckets, self.n))
            d[self._est_h[r], idx] = 1.0
            rows.append(d)
        return np.concatenate(rows, axis=0).astype(np.complex128)

    def _node_measurements(self, y, node):
        return PhaselessMeasurements(
            {"cm": y[f"{node.key}_cm"], "cm_tail": y[f"{node.key}_cm_tail"]}
        )

    def identify(self, y: PhaselessMeasurements) -> np.ndarray:
        """Candidate set containing every (k,eps) l1-heavy hitter."""

        def rec(node):
            sub_y = self._node_measurements(y, node)
            if node.left is None:
                return node.cm.identify(sub_y)
            S1 = rec(node.left)
            S2 = rec(node.right)
            if len(S1) == 0 or len(S2) == 0:
                return np.empty(0, dtype=np.int64)
            cand = (S1[:, None] << node.right.bits | S2[None, :]).ravel()
            return node.cm.identify(sub_y, candidates=np.unique(cand))

        return rec(self.root)

    def point_queries(self, counters, idx) -> np.ndarray:
        """Median-of-neighbour estimates from (possibly residual) counters."""
        idx = np.asarray(idx, dtype=np.int64)
        vals = counters[np.arange(self.est_reps)[:, None], self._est_h[:, idx]]
        return np.median(vals, axis=0)

    def to_config(self) -> dict:
        return {"type": "l1", "n": self.n, "k": self.k, "eps": self.eps, "m": self.m}


def l1_identify(y: PhaselessMeasurements, ens: L1Ensemble) -> np.ndarray:
    return ens.identify(y)


def l1_decode(y: PhaselessMeasurements, ens: L1Ensemble, k: int | None = None,
              eps: float | None = None):
    """Iterative weak-system loop; returns (SparseApprox, diagnostics).

    Residual measurements are Phi x - Phi xhat with Phi x = |Phi x| taken once
    at the start; the signed residual counters are internal only.
    """
    k = ens.k if k is None else k
    cfg = ens.cfg
    S = ens.identify(y)
    diag = {"candidates": len(S), "rounds": 0, "aborted": False}
    n = ens.n
    if len(S) == 0:
        return SparseApprox.zero(), diag
    base = y["est"].astype(np.float64)
    xhat = np.zeros(n)
    keep = max(1, int(np.ceil(cfg["keep_factor"] * k)))
    rounds = max(1, int(np.ceil(np.log2(max(k, 2)))) + int(cfg["rounds_extra"]))
    best = xhat.copy()
    best_proxy = np.inf
    for t in range(rounds):
        counters = base.copy()
        if xhat.any():
            supp = np.nonzero(xhat)[0]
            for r in range(ens.est_reps):
                np.add.at(counters[r], ens._est_h[r, supp], -xhat[supp])
        proxy = float(np.abs(counters).sum() / ens.est_reps)
        if proxy >= best_proxy:
            diag["aborted"] = True
            break  # residual stopped improving: keep the best iterate
        best, best_proxy = xhat.copy(), proxy
        diag["rounds"] = t + 1
        est = ens.point_queries(counters, S)
        upd = xhat[S] + est
        order = np.argsort(-upd, kind="stable")[:keep]
        new = np.zeros(n)
        new[S[order]] = np.maximum(upd[order], 0.0)
        xhat = new
    # final residual check for the last iterate
    counters = base.copy()
    supp = np.nonzero(xhat)[0]
    for r in range(ens.est_reps):
        np.add.at(counters[r], ens._est_h[r, supp], -xhat[supp])
    if float(np.abs(counters).sum() / ens.est_reps) < best_proxy:
        best = xhat
    supp = np.nonzero(best)[0]
    return SparseApprox(supp, best[supp].astype(complex)), diag
