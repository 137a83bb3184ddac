"""Phaseless-compatible sketches: Count-Sketch magnitudes, heavy-hitter
identification, and Count-Min-style identification for nonnegative signals.

Identification never needs measurement phases -- bucket magnitudes suffice --
which is what makes these usable downstream of |Phi x|.  Value estimation is
magnitude-only as well: the sign/phase of a coordinate is NOT recoverable
from bucket magnitudes and is left to the phase machinery.
"""

from __future__ import annotations

import numpy as np

from .constants import DEFAULT
from .measurements import PhaselessMeasurements
from .seeded import BernoulliLayer, HashFamily, as_stream


def _bucket_sums(x, buckets, h_vals, weights):
    y = np.zeros(buckets, dtype=np.complex128)
    np.add.at(y, h_vals, weights * x)
    return y


class CountSketchEnsemble:
    """reps x (bucket_factor*K) random-sign bucket sketch.

    Point queries return magnitude estimates: median over repetitions of the
    magnitude of i's bucket.
    """

    def __init__(self, n: int, K: int, seed: int, tag: str = "cs",
                 reps: int | None = None, bucket_factor: int | None = None):
        cfg = DEFAULT.mod("sketches")
        self.n, self.K = int(n), int(K)
        self.reps = int(cfg["cs_reps"] if reps is None else reps)
        bf = int(cfg["cs_bucket_factor"] if bucket_factor is None else bucket_factor)
        self.buckets = max(2, bf * self.K)
        self.stream = as_stream(seed, tag)
        self.hashes = [
            HashFamily.from_stream(self.stream, 2, n, self.buckets, r, 0)
            for r in range(self.reps)
        ]
        self._h = np.stack([h.eval_array(np.arange(n)) for h in self.hashes])
        self._sigma = np.stack(
            [self.stream.sign_array(np.arange(n, dtype=np.uint64), r, 1) for r in range(self.reps)]
        )

    @property
    def m(self) -> int:
        return self.reps * self.buckets

    def measure(self, x: np.ndarray) -> PhaselessMeasurements:
        if len(x) != self.n:
            raise ValueError("dimension mismatch")
        out = np.empty((self.reps, self.buckets))
        for r in range(self.reps):
            out[r] = np.abs(_bucket_sums(x, self.buckets, self._h[r], self._sigma[r]))
        return PhaselessMeasurements({"cs": out})

    def point_query(self, y: PhaselessMeasurements, i) -> np.ndarray:
        """Magnitude estimate |x_i| (vectorised over an index array)."""
        idx = np.atleast_1d(np.asarray(i, dtype=np.int64))
        vals = y["cs"][np.arange(self.reps)[:, None], self._h[:, idx]]
        est = np.median(vals, axis=0)
        return est if np.ndim(i) else float(est[0])

    def dense(self) -> np.ndarray:
        rows = np.zeros((self.m, self.n), dtype=np.complex128)
        for r in range(self.reps):
            rows[r * self.buckets + self._h[r], np.arange(self.n)] = self._sigma[r]
        return rows

    def to_config(self) -> dict:
        return {"type": "count_sketch", "n": self.n, "K": self.K,
                "reps": self.reps, "buckets": self.buckets}


class HHEnsemble:
    """Dyadic bit-testing tree for heavy-hitter identification.

    Level l sketches the 2^l prefix-aggregated signal X_p = sum_{i in p}
    sigma_i x_i with a fresh pairwise bucket hash and per-prefix signs; the
    decoder walks down the tree keeping the heaviest-looking prefixes.  Only
    bucket magnitudes are consumed.
    """

    def __init__(self, n: int, K: int, seed: int, tag: str = "hh",
                 reps: int | None = None):
        cfg = DEFAULT.mod("sketches")
        self.n, self.K = int(n), int(K)
        self.reps = int(cfg["hh_reps"] if reps is None else reps)
        self.keep = max(2, int(cfg["hh_keep_factor"] * K))
        self.out_size = max(1, int(cfg["hh_out_factor"] * K))
        self.buckets = max(2, int(cfg["hh_bucket_factor"] * K))
        self.depth = max(1, int(np.ceil(np.log2(max(n, 2)))))
        self.start = min(self.depth, max(1, int(np.ceil(np.log2(2 * self.buckets)))))
        self.stream = as_stream(seed, tag)
        self._levels = list(range(self.start, self.depth + 1))
        self._hashes = {
            (l, r): HashFamily.from_stream(self.stream, 2, 1 << l, self.buckets, l, r, 0)
            for l in self._levels
            for r in range(self.reps)
        }

    @property
    def m(self) -> int:
        return len(self._levels) * self.reps * self.buckets

    def _prefix(self, idx, level):
        return np.asarray(idx, dtype=np.int64) >> (self.depth - level)

    def _sigma(self, level, r):
        # fresh coordinate signs per (level, rep): a cancellation between two
        # heads sharing a prefix must not survive the median over reps
        return self.stream.sign_array(np.arange(self.n, dtype=np.uint64), level, r, 1)

    def measure(self, x: np.ndarray) -> PhaselessMeasurements:
        if len(x) != self.n:
            raise ValueError("dimension mismatch")
        idx = np.arange(self.n)
        blocks = {}
        for l in self._levels:
            pref = self._prefix(idx, l)
            out = np.empty((self.reps, self.buckets))
            for r in range(self.reps):
                h = self._hashes[(l, r)].eval_array(pref)
                out[r] = np.abs(_bucket_sums(x, self.buckets, h, self._sigma(l, r)))
            blocks[f"hh_l{l}"] = out
        return PhaselessMeasurements(blocks)

    def identify(self, y: PhaselessMeasurements) -> np.ndarray:
        """Candidate set S (|S| <= out_size) with H_K(x) ⊆ S w.h.p."""
        cand = np.arange(min(1 << self.start, 1 << self.depth), dtype=np.int64)
        for l in self._levels:
            block = y[f"hh_l{l}"]
            # energy score: mean over reps of |bucket|^2.  Intra-prefix sign
            # cancellation hits ~half the reps, so a median can sit on the
            # cancelled half; the mean of squares is unbiased for the prefix
            # energy plus a common noise floor.
            vals = np.empty((self.reps, len(cand)))
            for r in range(self.reps):
                h = self._hashes[(l, r)].eval_array(cand)
                vals[r] = block[r, h]
            score = np.mean(vals**2, axis=0)
            keep = self.keep if l < self.depth else self.out_size
            if len(cand) > keep:
                top = np.argpartition(-score, keep - 1)[:keep]
                cand = cand[top]
            if l < self.depth:
                shift = self.depth - (l + 1)
                cand = np.concatenate([cand * 2, cand * 2 + 1])
                cand = cand[(cand << shift) < self.n]
        return np.sort(cand[cand < self.n])

    def dense(self) -> np.ndarray:
        rows = np.zeros((self.m, self.n), dtype=np.complex128)
        idx = np.arange(self.n)
        off = 0
        for l in self._levels:
            pref = self._prefix(idx, l)
            for r in range(self.reps):
                h = self._hashes[(l, r)].eval_array(pref)
                rows[off + h, idx] = self._sigma(l, r)
                off += self.buckets
        return rows

    def to_config(self) -> dict:
        return {"type": "heavy_hitters", "n": self.n, "K": self.K,
                "reps": self.reps, "buckets": self.buckets,
                "levels": self._levels}


class CountMinEnsemble:
    """Nonnegative 0/1 bucket sketch plus an l1 tail estimator sublayer.

    For x >= 0 the measurements |Phi x| equal Phi x, so classical Count-Min
    reasoning applies: every bucket over-estimates its members.  Candidates
    are kept when their smallest bucket clears a threshold proportional to
    the estimated tail mass over K = k/eps.
    """

    def __init__(self, n: int, k: int, eps: float, seed: int, tag: str = "cm",
                 reps: int | None = None):
        cfg = DEFAULT.mod("sketches")
        self.n, self.k, self.eps = int(n), int(k), float(eps)
        self.K = max(1, int(np.ceil(k / eps)))
        self.buckets = max(2, int(cfg["cm_bucket_factor"] * self.K))
        depth = np.log2(max(2.0, eps * n / max(k, 1)))
        self.reps = int(reps if reps is not None else max(cfg["cm_reps_floor"], int(np.ceil(depth))))
        self.cap = max(1, int(cfg["cm_cap_factor"] * self.K))
        self.tail_rate = 1.0 / (cfg["cm_tail_rate_c"] * max(k, 1))
        self.tail_rows = int(cfg["cm_tail_rows"])
        self.tail_scale = float(cfg["cm_tail_scale"])
        self.thresh_scale = float(cfg["cm_thresh_scale"])
        self.stream = as_stream(seed, tag)
        self.hashes = [
            HashFamily.from_stream(self.stream, 2, n, self.buckets, r, 0)
            for r in range(self.reps)
        ]
        self._h = np.stack([h.eval_array(np.arange(n)) for h in self.hashes])
        self._tail_layer = BernoulliLayer(
            self.stream.derive("tail"), self.tail_rows, n, min(1.0, self.tail_rate)
        )

    @property
    def m(self) -> int:
        return self.reps * self.buckets + self.tail_rows

    def measure(self, x: np.ndarray) -> PhaselessMeasurements:
        x = np.asarray(x)
        if len(x) != self.n:
            raise ValueError("dimension mismatch")
        if np.any(x.real < -1e-12) or np.any(np.abs(np.asarray(x).imag) > 1e-12):
            raise ValueError("count-min identification requires nonnegative real signals")
        xr = np.maximum(x.real, 0.0)
        out = np.empty((self.reps, self.buckets))
        ones = np.ones(self.n)
        for r in range(self.reps):
            out[r] = np.abs(_bucket_sums(xr, self.buckets, self._h[r], ones)).real
        tail = np.abs(self._tail_layer.apply(xr))
        return PhaselessMeasurements({"cm": out, "cm_tail": tail})

    def tail_estimate(self, y: PhaselessMeasurements) -> float:
        """Estimate of ||x_{-k}||_1, biased low by design (protects recall)."""
        med = float(np.median(y["cm_tail"]))
        return med / self.tail_rate * self.tail_scale

    def identify(self, y: PhaselessMeasurements, candidates=None) -> np.ndarray:
        """Subset of ``candidates`` containing every (k,eps) l1-heavy hitter."""
        if candidates is None:
            candidates = np.arange(self.n)
        idx = np.asarray(candidates, dtype=np.int64)
        if idx.size == 0:
            return idx
        vals = y["cm"][np.arange(self.reps)[:, None], self._h[:, idx]]
        est = vals.min(axis=0)
        tau = self.thresh_scale * self.tail_estimate(y) / self.K
        keep = est >= tau
        kept, scores = idx[keep], est[keep]
        if len(kept) > self.cap:
            top = np.argpartition(-scores, self.cap - 1)[: self.cap]
            kept = kept[top]
        return np.sort(kept)

    def point_query(self, y: PhaselessMeasurements, i) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(i, dtype=np.int64))
        vals = y["cm"][np.arange(self.reps)[:, None], self._h[:, idx]]
        est = vals.min(axis=0)
        return est if np.ndim(i) else float(est[0])

    def dense(self) -> np.ndarray:
        rows = np.zeros((self.m, self.n), dtype=np.complex128)
        for r in range(self.reps):
            rows[r * self.buckets + self._h[r], np.arange(self.n)] = 1.0
        rows[self.reps * self.buckets:] = self._tail_layer.dense()
        return rows

    def to_config(self) -> dict:
        return {"type": "count_min", "n": self.n, "k": self.k, "eps": self.eps,
                "reps": self.reps, "buckets": self.buckets}
