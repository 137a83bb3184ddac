"""Exact recovery of k-sparse signals from O(k) magnitude measurements.

Coordinates are hashed into B = k/(c log k) buckets; inside each bucket the
sub-signal is recovered up to a bucket-global rotation from the magnitudes
of 2K low DFT samples, their running prefix sums and quarter-turn companion
rows (chain the prefix magnitudes through the Law of Cosines, then Prony /
linear-recurrence decoding on the recovered samples).  Relative rotations
between buckets are stitched from sparse Bernoulli rows that hit exactly two
support coordinates, via DFS over the bucket graph with a majority vote
across edge groups.

The prefix weights are random unit-modulus phases rather than the classical
all-ones: with all-ones weights a prefix sum can vanish structurally (a
single spike at coordinate n/2 zeroes every other prefix), which breaks the
chain; random weights make that a probability-zero event.  ``strict_real``
restores all-ones weights for real two-phase signals.
"""

from __future__ import annotations

import cmath

import numpy as np

from . import BucketUnsatError, StitchFailure
from .constants import DEFAULT
from .measurements import PhaselessMeasurements
from .phases import law_of_cosines_angle
from .graph import dfs_propagate
from .seeded import BernoulliLayer, HashFamily, as_stream
from .signals import SparseApprox, wrap_angle

TWO_PI = 2.0 * np.pi


class NoiselessEnsemble:
    """Implicit sensing matrix for exact sparse recovery."""

    def __init__(self, n: int, k: int, seed, consts=None, strict_real: bool = False,
                 bucket_exponent: float | None = None):
        cfg = (consts or DEFAULT).mod("exact")
        self.n, self.k = int(n), int(k)
        self.strict_real = strict_real
        self.log2k = max(1, int(np.ceil(np.log2(max(k, 2)))))
        if bucket_exponent is None:
            self.B = max(1, round(k / (cfg["c_bucket"] * self.log2k)))
        else:
            # trade-off mode: k^(1-a) buckets, lower failure probability
            self.B = max(1, round(k ** (1.0 - bucket_exponent)))
        # bucket capacity 5 log k (natural log; the tail bound only needs
        # the capacity a constant factor above the mean occupancy)
        self.K = max(2, int(np.ceil(cfg["K_factor"] * np.log(max(k, 2)))))
        if self.B > 1:
            self.K = min(self.K, self.k)
        else:
            self.K = max(self.K, self.k)  # single bucket must hold everything
        self.alpha = float(cfg["alpha"])
        self.c_R = float(cfg["c_R"])
        # clustered support coordinates push recurrence roots off the grid
        # proportionally to the cluster conditioning; anything within a
        # quarter grid step still snaps to the right integer, and the
        # re-simulation check catches wrong snaps
        self.snap_tol = max(float(cfg["snap_tol"]), 0.25 * 2.0 * np.pi / n)
        self.verify_tol = float(cfg["verify_tol"])
        self.stream = as_stream(seed, "noiseless")
        t = max(2, int(np.ceil(cfg["hash_degree_factor"] * k)))
        self.hash = HashFamily.from_stream(self.stream, t, n, self.B, 0)
        self.omega = cmath.exp(-2j * np.pi / n)
        if strict_real:
            self.w = np.ones(2 * self.K, dtype=np.complex128)
        else:
            ph = self.stream.phase_array(np.arange(2 * self.K, dtype=np.uint64), 1)
            ph[0] = 0.0
            self.w = np.exp(1j * ph)
        self.L_max = max(1, int(np.ceil(np.log2(max(k, 2)))))
        self.small_level = int(np.ceil(self.log2k / 2)) + 1
        self._decode_scratch = None
        self.layers = {}
        for ell in range(1, self.L_max + 1):
            rows = self.alpha * self.c_R * (2**ell)
            if ell <= self.small_level:
                rows *= self.log2k
            self.layers[ell] = BernoulliLayer(
                self.stream.derive("stitch", ell), int(round(rows)), n, 2.0**-ell
            )

    # -- measurement ---------------------------------------------------------

    @property
    def m(self) -> int:
        bucket_rows = self.B * (3 * 2 * self.K - 1)
        stitch_rows = 2 * sum(layer.m for layer in self.layers.values())
        return bucket_rows + stitch_rows

    def _companion_bits(self, ell: int, rows, cols) -> np.ndarray:
        addr = np.asarray(rows, dtype=np.uint64) * np.uint64(self.n) + np.asarray(
            cols, dtype=np.uint64
        )
        return self.stream.bernoulli_array(0.5, addr, 2, ell)

    def _bucket_samples(self, x: np.ndarray) -> np.ndarray:
        """f[j, m] = sum_{i: h(i)=j} x_i omega^{m i}, for m < 2K."""
        f = np.zeros((self.B, 2 * self.K), dtype=np.complex128)
        nz = np.nonzero(x)[0]
        if len(nz) == 0:
            return f
        h = self.hash.eval_array(nz)
        powers = np.exp(
            -2j * np.pi * np.outer(np.arange(2 * self.K), nz) / self.n
        ) * x[nz][None, :]
        for j in range(self.B):
            sel = h == j
            if sel.any():
                f[j] = powers[:, sel].sum(axis=1)
        return f

    def measure(self, x: np.ndarray) -> PhaselessMeasurements:
        if len(x) != self.n:
            raise ValueError("dimension mismatch")
        x = np.asarray(x, dtype=np.complex128)
        f = self._bucket_samples(x)
        wf = self.w[None, :] * f
        prefixes = np.cumsum(wf, axis=1)
        companions = prefixes[:, :-1] + 1j * wf[:, 1:]
        blocks = {
            "bucket_singles": np.abs(f),
            "bucket_prefixes": np.abs(prefixes),
            "bucket_companions": np.abs(companions),
        }
        for ell, layer in self.layers.items():
            blocks[f"stitch_{ell}"] = np.abs(layer.apply(x))
            cols, rows = layer._pairs()
            mult = np.where(self._companion_bits(ell, rows, cols), 1j, 1.0)
            y = np.zeros(layer.m, dtype=np.complex128)
            np.add.at(y, rows, mult * x[cols])
            blocks[f"stitch_companion_{ell}"] = np.abs(y)
        out = PhaselessMeasurements(blocks)
        levels = sorted(self.layers)
        out.derived["stitch_cat"] = (
            np.concatenate([blocks[f"stitch_{l}"] for l in levels]),
            np.concatenate([blocks[f"stitch_companion_{l}"] for l in levels]),
        )
        return out

    def dense(self) -> np.ndarray:
        idx = np.arange(self.n)
        h = self.hash.eval_array(idx)
        rows = []
        F = np.exp(-2j * np.pi * np.outer(np.arange(2 * self.K), idx) / self.n)
        masks = np.stack([(h == j).astype(float) for j in range(self.B)])
        for j in range(self.B):
            rows.append(F * masks[j][None, :])
        for j in range(self.B):
            rows.append(np.cumsum(self.w[:, None] * F * masks[j][None, :], axis=0))
        for j in range(self.B):
            pref = np.cumsum(self.w[:, None] * F * masks[j][None, :], axis=0)
            rows.append(pref[:-1] + 1j * self.w[1:, None] * F[1:] * masks[j][None, :])
        for ell, layer in self.layers.items():
            d = layer.dense().astype(np.complex128)
            rows.append(d)
            cols_rows = layer._pairs()
            comp = np.zeros_like(d)
            cols, rws = cols_rows
            mult = np.where(self._companion_bits(ell, rws, cols), 1j, 1.0)
            comp[rws, cols] = mult
            rows.append(comp)
        return np.concatenate(rows, axis=0)

    def to_config(self) -> dict:
        return {"type": "noiseless", "n": self.n, "k": self.k, "B": self.B,
                "K": self.K, "levels": list(self.layers), "m": self.m}


ABS_TOL_FACTOR = 1e-9


def solve_bucket(singles, prefixes, companions, w, n, K, snap_tol=1e-6, verify_tol=1e-9,
                 allowed=None):
    """Recover a K-sparse sub-signal up to rotation from bucket magnitudes.

    Returns (positions, values); raises BucketUnsatError when no consistent
    assignment exists (bucket overflow or corrupted data).  ``allowed``
    optionally filters snapped support candidates (bucket membership);
    without it a near-coincident pair at the resolution limit can alias
    into a neighbouring grid point.
    """
    singles = np.asarray(singles, dtype=np.float64)
    scale = float(max(singles.max(initial=0.0), np.asarray(prefixes).max(initial=0.0)))
    if scale <= 0.0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.complex128)
    atol = ABS_TOL_FACTOR * scale

    # 1) chain the weighted samples g_m = w_m f_m through the prefix sums.
    # The plain prefix row gives cos(theta), the quarter-turn companion row
    # gives sin(theta) (theta = angle of g_m relative to the running sum s),
    # so atan2 recovers the step exactly -- well conditioned even when
    # arccos alone would lose half the mantissa near theta in {0, pi}.
    two_k = len(singles)
    g = np.zeros(two_k, dtype=np.complex128)
    s = 0.0 + 0.0j
    for m in range(two_k):
        a = float(singles[m])
        if a <= atol:
            g[m] = 0.0
        elif abs(s) <= atol:
            g[m] = a  # segment anchor: phase fixed to the global gauge
        else:
            sa = abs(s)
            cos_t = (float(prefixes[m]) ** 2 - sa * sa - a * a) / (2.0 * sa * a)
            sin_t = (sa * sa + a * a - float(companions[m - 1]) ** 2) / (2.0 * sa * a)
            if max(abs(cos_t), abs(sin_t)) > 1.0 + 1e-6:
                raise BucketUnsatError("inconsistent chain magnitudes")
            theta = cmath.phase(complex(cos_t, sin_t))
            g[m] = cmath.rect(a, cmath.phase(s) + theta)
        s += g[m]
        if abs(abs(s) - float(prefixes[m])) > 1e-5 * scale:
            raise BucketUnsatError("prefix magnitude mismatch while chaining")
    f = g / np.asarray(w, dtype=np.complex128)

    # 2) minimal linear recurrence annihilating f -> support from the roots
    H = np.empty((K, K + 1), dtype=np.complex128)
    for i in range(K):
        H[i] = f[i : i + K + 1]
    sv = np.linalg.svd(H, compute_uv=False)
    rank = int(np.sum(sv > 1e-10 * sv[0])) if sv[0] > 0 else 0
    if rank == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.complex128)
    r = rank
    rows = two_k - r
    A = np.empty((rows, r), dtype=np.complex128)
    for i in range(rows):
        A[i] = f[i : i + r]
    b = f[r : r + rows]
    coef, *_ = np.linalg.lstsq(A, -b, rcond=None)
    roots = np.roots(np.concatenate(([1.0], coef[::-1])))

    # 3) snap roots to the n-grid of unit roots; off-grid roots are
    # numerically spurious (they carry ~zero amplitude), so drop them and
    # let the verification step adjudicate
    pos = np.mod(np.round(-np.angle(roots) * n / TWO_PI).astype(np.int64), n)
    snapped = np.exp(-2j * np.pi * pos / n)
    pos = np.unique(pos[np.abs(roots - snapped) <= snap_tol])
    if allowed is not None and len(pos):
        pos = pos[allowed(pos)]
    if len(pos) == 0:
        raise BucketUnsatError("no recurrence root lands on the unit grid")
    if len(pos) > K:
        raise BucketUnsatError("recovered support exceeds bucket capacity")

    # 4) values by least squares on the Vandermonde system, then verify
    V = np.exp(-2j * np.pi * np.outer(np.arange(two_k), pos) / n)
    vals, *_ = np.linalg.lstsq(V, f, rcond=None)
    keep = np.abs(vals) > 1e-8 * np.abs(vals).max(initial=0.0)
    pos, vals = pos[keep], vals[keep]
    fhat = V[:, keep] @ vals
    wf = np.asarray(w) * fhat
    pref_hat = np.cumsum(wf)
    comp_hat = pref_hat[:-1] + 1j * wf[1:]
    ok = (
        np.allclose(np.abs(fhat), singles, atol=verify_tol * scale, rtol=0)
        and np.allclose(np.abs(pref_hat), prefixes, atol=verify_tol * scale, rtol=0)
        and np.allclose(np.abs(comp_hat), companions, atol=verify_tol * scale, rtol=0)
    )
    if not ok:
        raise BucketUnsatError("re-simulated magnitudes do not match")
    return pos, vals


try:  # compiled hot path; the numpy reference below stays authoritative
    from . import exact_fast as _fast
except ImportError:  # pragma: no cover - numba not installed
    _fast = None


def _support_pairs(layer, supp):
    """(rows, cols) nonzero pairs of the given columns, via column lists."""
    if _fast is not None and 0.0 < layer.rate < 1.0 and len(supp):
        cap = len(supp) * int(layer.m * layer.rate + 8 * np.sqrt(layer.m * layer.rate) + 16)
        rows = np.empty(cap, dtype=np.int64)
        cols = np.empty(cap, dtype=np.int64)
        count = _fast.column_rows_kernel(
            np.uint64(layer.stream.base), np.asarray(supp, dtype=np.int64),
            layer.m, layer.rate, rows, cols,
        )
        if count <= cap:
            return rows[:count], cols[:count]
    rows_all, cols_all = [], []
    for i in np.asarray(supp, dtype=np.int64).tolist():
        r = layer.column_rows(i)
        rows_all.append(r)
        cols_all.append(np.full(len(r), i, dtype=np.int64))
    if not rows_all:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.concatenate(rows_all), np.concatenate(cols_all)


def count_two_hit_rows(ens: NoiselessEnsemble, ell: int, supp):
    """Rows of stitch layer ell hitting exactly two support coordinates.

    Walks the per-column nonzero lists (never the full matrix); returns
    (row indices, (u, v) pairs) with u < v.
    """
    layer = ens.layers[ell]
    supp = np.asarray(supp, dtype=np.int64)
    if len(supp) == 0:
        return np.empty(0, dtype=np.int64), np.empty((0, 2), dtype=np.int64)
    rows_all, cols_all = _support_pairs(layer, supp)
    if len(rows_all) == 0:
        return np.empty(0, dtype=np.int64), np.empty((0, 2), dtype=np.int64)
    counts = np.bincount(rows_all, minlength=layer.m)
    J = np.nonzero(counts == 2)[0]
    sel = counts[rows_all] == 2
    r2, c2 = rows_all[sel], cols_all[sel]
    order = np.lexsort((c2, r2))
    pairs = c2[order].reshape(-1, 2)
    return J, pairs


def _hash_eval(ens, idx):
    """Bucket assignment of an index array (compiled Horner when available)."""
    idx = np.asarray(idx, dtype=np.int64)
    if _fast is not None and len(idx):
        out = np.empty(len(idx), dtype=np.int64)
        _fast.hash_eval_kernel(ens.hash.coeffs, ens.hash.p, ens.hash.B, idx, out)
        return out
    return ens.hash.eval_array(idx)


def _solve_bucket_dispatch(ens, singles, prefixes, companions):
    """Fast kernel when available; falls back to the reference on doubt."""
    if _fast is not None:
        pos = np.empty(ens.K + 1, dtype=np.int64)
        val = np.empty(ens.K + 1, dtype=np.complex128)
        count, status = _fast.solve_bucket_kernel(
            np.ascontiguousarray(singles), np.ascontiguousarray(prefixes),
            np.ascontiguousarray(companions), ens.w, ens.n, ens.K,
            ens.snap_tol, ens.verify_tol, pos, val,
            ens.hash.coeffs, ens.hash.p, ens.hash.B, -1,
        )
        if status == 0:
            order = np.argsort(pos[:count])
            return pos[:count][order], val[:count][order]
        if status == 1:
            raise BucketUnsatError("no consistent assignment (fast path)")
        # status 2: numerically ambiguous; the reference adjudicates
    return solve_bucket(singles, prefixes, companions, ens.w, ens.n, ens.K,
                        ens.snap_tol, ens.verify_tol)


def _majority_pattern(patterns):
    """Most frequent pattern; ties resolved by the smallest key."""
    counts = {}
    for key in patterns:
        counts[key] = counts.get(key, 0) + 1
    return min(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]


def _stitch_edges(ens, lev, supp, mags, angles, owner, y0, y1):
    """Oriented bucket-offset edges from one stitch layer's two-hit rows.

    The plain row pins cos(delta), the mixed quarter-turn companion pins
    sin(delta); atan2 recovers the oriented difference with uniform
    conditioning (arccos alone loses half the mantissa near {0, pi}).
    Same-bucket pairs and equal-bit pairs are dropped.  Returns three
    parallel arrays (a, b, offset).
    """
    layer = ens.layers[lev]
    if _fast is not None and 0.0 < layer.rate < 1.0:
        m = layer.m
        scr_c = np.zeros(m, dtype=np.int64)
        scr_f = np.zeros(m, dtype=np.int64)
        scr_s = np.zeros(m, dtype=np.int64)
        out_a = np.empty(m, dtype=np.int64)
        out_b = np.empty(m, dtype=np.int64)
        out_o = np.empty(m, dtype=np.float64)
        cnt = _fast.stitch_edges_kernel(
            supp, mags, angles, owner,
            np.uint64(layer.stream.base), m, layer.rate,
            np.uint64(ens.stream._state((2, lev))), ens.n,
            np.ascontiguousarray(y0, dtype=np.float64),
            np.ascontiguousarray(y1, dtype=np.float64),
            scr_c, scr_f, scr_s, out_a, out_b, out_o,
        )
        return out_a[:cnt], out_b[:cnt], out_o[:cnt]

    empty = (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
    J, pairs = count_two_hit_rows(ens, lev, supp)
    if len(J) == 0:
        return empty
    u, v = pairs[:, 0], pairs[:, 1]
    pu = np.searchsorted(supp, u)
    pv = np.searchsorted(supp, v)
    a, b = owner[pu], owner[pv]
    bits_u = ens._companion_bits(lev, J, u)
    bits_v = ens._companion_bits(lev, J, v)
    keep = (a != b) & (bits_u != bits_v)
    if not keep.any():
        return empty
    J, a, b, pu, pv, bits_u = J[keep], a[keep], b[keep], pu[keep], pv[keep], bits_u[keep]
    mu, mv = mags[pu], mags[pv]
    ok = (mu > 0) & (mv > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos_d = (y0[J] ** 2 - mu**2 - mv**2) / (2 * mu * mv)
        sin_d = (mu**2 + mv**2 - y1[J] ** 2) / (2 * mu * mv)
    sin_d = np.where(bits_u, -sin_d, sin_d)
    ok &= np.maximum(np.abs(cos_d), np.abs(sin_d)) <= 1.0 + 1e-6
    delta = np.arctan2(sin_d, cos_d)
    off = wrap_angle(delta - (angles[pv] - angles[pu]))
    return a[ok], b[ok], off[ok]


def _dfs_dispatch(ea, eb, eo, B):
    """(phases, component label per vertex) for an edge array triple."""
    if _fast is not None:
        return _fast.dfs_kernel(ea, eb, eo, B)
    assign, comps = dfs_propagate(list(zip(ea.tolist(), eb.tolist(), eo.tolist())), B)
    labels = np.empty(B, dtype=np.int64)
    for ci, members in enumerate(comps):
        for mbr in members:
            labels[mbr] = ci
    return assign, labels


def _fast_decode(y, ens):
    """One-call compiled decode; returns None when the kernel defers."""
    scratch = ens._decode_scratch
    if scratch is None:
        cap = ens.B * (ens.K + 1)
        levels = sorted(ens.layers)
        scratch = ens._decode_scratch = {
            "supp": np.empty(cap, dtype=np.int64),
            "val": np.empty(cap, dtype=np.complex128),
            "psi": np.empty(ens.B, dtype=np.float64),
            "sizes": np.empty(ens.B, dtype=np.int64),
            "info": np.empty(5, dtype=np.int64),
            "lev_m": np.array([ens.layers[l].m for l in levels], dtype=np.int64),
            "lev_rate": np.array([ens.layers[l].rate for l in levels]),
            "lev_base": np.array([ens.layers[l].stream.base for l in levels], dtype=np.uint64),
            "lev_bits": np.array([ens.stream._state((2, l)) for l in levels], dtype=np.uint64),
            "lev_off": np.concatenate(
                ([0], np.cumsum([ens.layers[l].m for l in levels])[:-1])
            ).astype(np.int64),
        }
    if "stitch_cat" in y.derived:
        y0cat, y1cat = y.derived["stitch_cat"]
    else:
        levels = sorted(ens.layers)
        y0cat = np.concatenate([np.asarray(y[f"stitch_{l}"]) for l in levels])
        y1cat = np.concatenate([np.asarray(y[f"stitch_companion_{l}"]) for l in levels])
    info = scratch["info"]
    _fast.decode_kernel(
        np.ascontiguousarray(y["bucket_singles"]),
        np.ascontiguousarray(y["bucket_prefixes"]),
        np.ascontiguousarray(y["bucket_companions"]),
        ens.w, ens.n, ens.K, ens.B, ens.snap_tol, ens.verify_tol,
        ens.hash.coeffs, ens.hash.p, ens.hash.B,
        scratch["lev_m"], scratch["lev_rate"], scratch["lev_base"],
        scratch["lev_bits"], y0cat, y1cat, scratch["lev_off"],
        ens.c_R, ens.L_max,
        scratch["supp"], scratch["val"], scratch["psi"], scratch["sizes"], info,
    )
    status = int(info[0])
    if status == 2:
        return None
    if status == 1:
        raise BucketUnsatError("no consistent bucket assignment")
    if status == 3:
        raise StitchFailure("no usable cross-bucket pairs")
    if status == 4:
        raise StitchFailure("all edge groups left the bucket graph disconnected")
    count = int(info[1])
    diag = {"bucket_sizes": scratch["sizes"].tolist(), "edges_used": int(info[2]),
            "groups": int(info[3])}
    if count == 0:
        return SparseApprox.zero(), diag
    supp = scratch["supp"][:count].copy()
    xv = scratch["val"][:count]  # bucket rotations already applied in-kernel
    top = int(np.argmax(np.round(np.abs(xv), 12)))
    xv = xv * cmath.exp(-1j * cmath.phase(xv[top]))
    return SparseApprox(supp, xv), diag


def noiseless_decode(y: PhaselessMeasurements, ens: NoiselessEnsemble):
    """Decode an exactly sparse signal up to a global rotation.

    Returns (SparseApprox, diagnostics).  Raises BucketUnsatError /
    StitchFailure when the (low-probability) bad events occur; callers in
    benchmark loops count those as failed trials.
    """
    if _fast is not None:
        got = _fast_decode(y, ens)
        if got is not None:
            return got
    diag = {"bucket_sizes": [], "edges_used": 0, "groups": 0}
    singles = y["bucket_singles"]
    prefixes = y["bucket_prefixes"]
    companions = y["bucket_companions"]
    pieces = []
    if _fast is not None:
        pos_out = np.empty((ens.B, ens.K + 1), dtype=np.int64)
        val_out = np.empty((ens.B, ens.K + 1), dtype=np.complex128)
        counts = np.empty(ens.B, dtype=np.int64)
        statuses = np.empty(ens.B, dtype=np.int64)
        _fast.solve_buckets_batch(
            np.ascontiguousarray(singles), np.ascontiguousarray(prefixes),
            np.ascontiguousarray(companions), ens.w, ens.n, ens.K,
            ens.snap_tol, ens.verify_tol, pos_out, val_out, counts, statuses,
            ens.hash.coeffs, ens.hash.p, ens.hash.B,
        )
        for j in range(ens.B):
            if statuses[j] == 0:
                order = np.argsort(pos_out[j, : counts[j]])
                pieces.append((pos_out[j, : counts[j]][order], val_out[j, : counts[j]][order]))
            elif statuses[j] == 1:
                raise BucketUnsatError("no consistent assignment (fast path)")
            else:  # numerically ambiguous; the reference adjudicates
                pieces.append(solve_bucket(
                    singles[j], prefixes[j], companions[j], ens.w, ens.n,
                    ens.K, ens.snap_tol, ens.verify_tol,
                    allowed=lambda ps, j=j: ens.hash.eval_array(ps) == j,
                ))
            diag["bucket_sizes"].append(len(pieces[-1][0]))
    else:
        for j in range(ens.B):
            pos, vals = _solve_bucket_dispatch(ens, singles[j], prefixes[j], companions[j])
            diag["bucket_sizes"].append(len(pos))
            pieces.append((pos, vals))

    supp = np.concatenate([p for p, _ in pieces]) if pieces else np.empty(0, np.int64)
    allvals = np.concatenate([v for _, v in pieces]) if pieces else np.empty(0, complex)
    if len(supp) == 0:
        return SparseApprox.zero(), diag
    expected = np.repeat(np.arange(ens.B), [len(p) for p, _ in pieces])
    owner_raw = _hash_eval(ens, supp)
    if np.any(owner_raw != expected):
        raise BucketUnsatError("recovered coordinate hashes to the wrong bucket")
    order = np.argsort(supp)
    supp, allvals, owner = supp[order], allvals[order], owner_raw[order]
    occupied = np.unique(owner)

    psi = np.zeros(ens.B)
    if len(occupied) > 1 and len(supp) > 1:
        ell = min(max(1, int(np.ceil(np.log2(len(supp))))), ens.L_max)
        mags = np.abs(allvals)
        angles = np.angle(allvals)
        # primary level first; the neighbouring layers were measured anyway
        # and their two-hit rows are just as valid, so harvest them when the
        # primary level leaves the bucket graph edge-starved
        levels = [ell] + [lv for lv in (ell - 1, ell + 1) if 1 <= lv <= ens.L_max]
        enough = 6 * len(occupied)
        parts = []
        total = 0
        for lev in levels:
            if total >= enough:
                break
            part = _stitch_edges(ens, lev, supp, mags, angles, owner,
                                 np.asarray(y[f"stitch_{lev}"]),
                                 np.asarray(y[f"stitch_companion_{lev}"]))
            parts.append(part)
            total += len(part[0])
        ea = np.concatenate([p[0] for p in parts]) if parts else np.empty(0, np.int64)
        eb = np.concatenate([p[1] for p in parts]) if parts else np.empty(0, np.int64)
        eo = np.concatenate([p[2] for p in parts]) if parts else np.empty(0)
        diag["edges_used"] = total
        if total == 0:
            raise StitchFailure("no usable cross-bucket pairs")

        group_size = max(1, int(round(ens.c_R * ell * 2**ell)))
        n_groups = max(1, total // group_size) if total >= group_size else 1
        diag["groups"] = n_groups
        patterns = []  # (vote key, raw canonical offsets)
        for gi in range(n_groups):
            lo = gi * group_size
            hi = total if gi == n_groups - 1 and n_groups * group_size > total else lo + group_size
            if n_groups == 1:
                lo, hi = 0, total
            assign, comp = _dfs_dispatch(ea[lo:hi], eb[lo:hi], eo[lo:hi], ens.B)
            if np.unique(comp[occupied]).size != 1:
                continue  # this group's graph leaves occupied buckets apart
            raw = wrap_angle(assign[occupied] - assign[int(occupied[0])])
            key = tuple(np.round(raw, 6).tolist())
            patterns.append((key, raw))
        if not patterns:
            raise StitchFailure("all edge groups left the bucket graph disconnected")
        if len(patterns) == 1:
            raw_best = patterns[0][1]
        else:
            best = _majority_pattern([key for key, _ in patterns])
            raw_best = next(raw for key, raw in patterns if key == best)
        for b, off in zip(occupied, raw_best):
            psi[int(b)] = off

    xv = allvals * np.exp(1j * psi[owner])
    # canonical representative of the rotation class: top coordinate positive
    # real, ties to the lowest index
    top = int(np.argmax(np.round(np.abs(xv), 12)))
    xv = xv * cmath.exp(-1j * cmath.phase(xv[top]))
    return SparseApprox(supp, xv), diag
