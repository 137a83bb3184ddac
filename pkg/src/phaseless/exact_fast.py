"""Compiled hot path for the exact sparse decoder.

Pure-python/numpy decoding of a single trial is dominated by interpreter and
LAPACK-dispatch overhead, which swamps the (tiny) amount of actual work and
hides the sublinear runtime the decoder is supposed to demonstrate.  This
module reimplements the per-bucket solver and the stitch-row enumeration as
numba kernels that reproduce the reference implementation bit-for-bit (the
seeded mixer is ported verbatim; the linear algebra is replaced by
equivalent small dense routines: incremental least squares instead of an
SVD rank probe, Durand-Kerner instead of companion eigenvalues).

Everything here is optional: install without numba and the reference numpy
path in ``exact`` is used instead.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
M1 = np.uint64(0xBF58476D1CE4E5B9)
M2 = np.uint64(0x94D049BB133111EB)
TWO53 = float(1 << 53)
HALF_THRESHOLD = np.uint64(int(np.ceil(0.5 * TWO53 - 0.5)))


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z + GOLDEN) & MASK
    z = ((z ^ (z >> np.uint64(30))) * M1) & MASK
    z = ((z ^ (z >> np.uint64(27))) * M2) & MASK
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _fold(state, word):
    return _mix64(state ^ ((word * M1) & MASK))


@njit(cache=True)
def column_rows_kernel(base_state, cols, m, rate, out_rows, out_cols):
    """Geometric-gap enumeration of Bernoulli column supports.

    base_state is the layer stream's root; addresses match
    SeededStream.uniform_array(draw_index, col).  Returns the pair count.
    """
    log1m = np.log1p(-rate)
    top = 0
    for ci in range(len(cols)):
        col = np.uint64(cols[ci])
        cstate = _fold(base_state, col)
        pos = -1
        draw = np.uint64(0)
        while True:
            u = (float(_mix64(_fold(cstate, draw)) >> np.uint64(11)) + 0.5) / TWO53
            pos += 1 + int(np.log(u) / log1m)
            if pos >= m:
                break
            out_rows[top] = pos
            out_cols[top] = cols[ci]
            top += 1
            draw += np.uint64(1)
    return top


@njit(cache=True)
def companion_bits_kernel(prefix_state, n, rows, cols, out):
    """bernoulli(1/2) at address rows*n + cols under the given prefix state."""
    for i in range(len(rows)):
        addr = np.uint64(rows[i]) * np.uint64(n) + np.uint64(cols[i])
        v = _mix64(_fold(prefix_state, addr))
        out[i] = (v >> np.uint64(11)) < HALF_THRESHOLD


@njit(cache=True)
def _chain(singles, prefixes, companions, w, atol, scale, f_out):
    """Quadrature chain; returns False on inconsistent magnitudes."""
    two_k = len(singles)
    s = 0.0 + 0.0j
    for m in range(two_k):
        a = singles[m]
        if a <= atol:
            g = 0.0 + 0.0j
        else:
            sa = abs(s)
            if sa <= atol:
                g = complex(a, 0.0)
            else:
                cos_t = (prefixes[m] ** 2 - sa * sa - a * a) / (2.0 * sa * a)
                sin_t = (sa * sa + a * a - companions[m - 1] ** 2) / (2.0 * sa * a)
                if abs(cos_t) > 1.0 + 1e-6 or abs(sin_t) > 1.0 + 1e-6:
                    return False
                # g = a * e^{i(theta + arg s)} without trig: rotate the unit
                # step (cos_t, sin_t), renormalised, by the unit vector s/|s|
                step = complex(cos_t, sin_t)
                step /= abs(step)
                g = a * step * (s / sa)
        s += g
        if abs(abs(s) - prefixes[m]) > 1e-5 * scale:
            return False
        f_out[m] = g / w[m]
    return True


@njit(cache=True)
def _solve_normal(A, b):
    """Least squares via normal equations + Gauss elimination (small, dense)."""
    r = A.shape[1]
    G = np.zeros((r, r), dtype=np.complex128)
    rhs = np.zeros(r, dtype=np.complex128)
    for i in range(r):
        for j in range(r):
            acc = 0.0 + 0.0j
            for t in range(A.shape[0]):
                acc += np.conj(A[t, i]) * A[t, j]
            G[i, j] = acc
        accb = 0.0 + 0.0j
        for t in range(A.shape[0]):
            accb += np.conj(A[t, i]) * b[t]
        rhs[i] = accb
    return _gauss_solve(G, rhs)


@njit(cache=True)
def _lstsq_qr(A, b):
    """Householder-QR least squares (condition number not squared)."""
    mrow, ncol = A.shape
    R = A.copy()
    y = b.copy()
    v = np.empty(mrow, dtype=np.complex128)
    for j in range(ncol):
        normx = 0.0
        for i in range(j, mrow):
            normx += abs(R[i, j]) ** 2
        normx = np.sqrt(normx)
        if normx == 0.0:
            return y[:ncol] * 0.0, False
        rjj = R[j, j]
        if abs(rjj) > 0.0:
            alpha = -(rjj / abs(rjj)) * normx
        else:
            alpha = complex(-normx, 0.0)
        vnorm2 = 0.0
        v[j] = rjj - alpha
        vnorm2 += abs(v[j]) ** 2
        for i in range(j + 1, mrow):
            v[i] = R[i, j]
            vnorm2 += abs(v[i]) ** 2
        if vnorm2 > 0.0:
            for c in range(j, ncol):
                tau = 0.0 + 0.0j
                for i in range(j, mrow):
                    tau += np.conj(v[i]) * R[i, c]
                tau = 2.0 * tau / vnorm2
                for i in range(j, mrow):
                    R[i, c] -= tau * v[i]
            tau = 0.0 + 0.0j
            for i in range(j, mrow):
                tau += np.conj(v[i]) * y[i]
            tau = 2.0 * tau / vnorm2
            for i in range(j, mrow):
                y[i] -= tau * v[i]
    x = np.zeros(ncol, dtype=np.complex128)
    for row in range(ncol - 1, -1, -1):
        if R[row, row] == 0.0:
            return x, False
        acc = y[row]
        for c in range(row + 1, ncol):
            acc -= R[row, c] * x[c]
        x[row] = acc / R[row, row]
    return x, True


@njit(cache=True)
def _gauss_solve(G, rhs):
    """Partial-pivot Gauss elimination; mutates its arguments."""
    r = G.shape[0]
    for col in range(r):
        piv = col
        best = abs(G[col, col])
        for row in range(col + 1, r):
            if abs(G[row, col]) > best:
                best = abs(G[row, col])
                piv = row
        if best == 0.0:
            return rhs * 0.0, False
        if piv != col:
            for j in range(r):
                G[col, j], G[piv, j] = G[piv, j], G[col, j]
            rhs[col], rhs[piv] = rhs[piv], rhs[col]
        inv = 1.0 / G[col, col]
        for row in range(col + 1, r):
            fac = G[row, col] * inv
            for j in range(col, r):
                G[row, j] -= fac * G[col, j]
            rhs[row] -= fac * rhs[col]
    x = np.zeros(r, dtype=np.complex128)
    for row in range(r - 1, -1, -1):
        acc = rhs[row]
        for j in range(row + 1, r):
            acc -= G[row, j] * x[j]
        x[row] = acc / G[row, row]
    return x, True


@njit(cache=True)
def _durand_kerner(coef, tol=1e-13, iters=50):
    """Roots of the monic polynomial z^r + coef[r-1] z^{r-1} + ... + coef[0]."""
    r = len(coef)
    roots = np.empty(r, dtype=np.complex128)
    for i in range(r):
        ang = 2.0 * np.pi * (i + 0.354) / r
        roots[i] = complex(np.cos(ang), np.sin(ang)) * 1.01
    for _ in range(iters):
        moved = 0.0
        for i in range(r):
            z = roots[i]
            p = 1.0 + 0.0j
            for j in range(r - 1, -1, -1):
                p = p * z + coef[j]
            q = 1.0 + 0.0j
            for j in range(r):
                if j != i:
                    q *= z - roots[j]
            if q == 0.0:
                continue
            step = p / q
            roots[i] = z - step
            moved = max(moved, abs(step))
        if moved < tol:
            break
    return roots


@njit(cache=True)
def solve_bucket_kernel(singles, prefixes, companions, w, n, K,
                        snap_tol, verify_tol, pos_out, val_out,
                        coeffs, hash_p, hash_B, bucket_j):
    """Returns (count, status): status 0 ok, 1 unsat, 2 fall back to reference.

    When bucket_j >= 0, snapped candidates that do not hash back to this
    bucket are discarded before the value fit (aliased near-cluster
    solutions would otherwise absorb a neighbouring grid point)."""
    two_k = len(singles)
    scale = 0.0
    for m in range(two_k):
        if singles[m] > scale:
            scale = singles[m]
        if prefixes[m] > scale:
            scale = prefixes[m]
    if scale <= 0.0:
        return 0, 0
    atol = 1e-9 * scale

    f = np.empty(two_k, dtype=np.complex128)
    if not _chain(singles, prefixes, companions, w, atol, scale, f):
        return 0, 1

    # minimal recurrence order by incremental least squares over a fixed
    # K-row window; the Gram matrix grows one column per candidate order
    fnorm2 = 0.0
    for m in range(two_k):
        fnorm2 += abs(f[m]) ** 2
    G = np.empty((K + 1, K + 1), dtype=np.complex128)
    for i in range(2):
        for j in range(i + 1):
            acc = 0.0 + 0.0j
            for t in range(K):
                acc += np.conj(f[t + i]) * f[t + j]
            G[i, j] = acc
            G[j, i] = np.conj(acc)
    built = 1  # columns 0..built of G are filled
    rank = -1
    coef = np.zeros(K, dtype=np.complex128)
    work = np.empty((K, K), dtype=np.complex128)
    rhs = np.empty(K, dtype=np.complex128)
    for r in range(1, K + 1):
        while built < r:  # grow the Gram by one column
            built += 1
            for i in range(built + 1):
                acc = 0.0 + 0.0j
                for t in range(K):
                    acc += np.conj(f[t + i]) * f[t + built]
                G[i, built] = acc
                G[built, i] = np.conj(acc)
        for i in range(r):
            for j in range(r):
                work[i, j] = G[i, j]
            rhs[i] = -G[i, r]
        c, ok = _gauss_solve(work[:r, :r], rhs[:r])
        if not ok:
            continue
        # residual evaluated directly (the Gram identity would amplify
        # cancellation by |c|^2, which explodes for clustered roots)
        resid = 0.0
        for i in range(K):
            acc = f[i + r]
            for j in range(r):
                acc += c[j] * f[i + j]
            resid += abs(acc) ** 2
        if resid <= 1e-12 * fnorm2 + 1e-300:
            rank = r
            coef[:r] = c
            break
    if rank < 0:
        return 0, 1

    roots = _durand_kerner(coef[:rank])
    kept = _roots_to_solution(roots, f, singles, prefixes, companions, w, n, K,
                              snap_tol, verify_tol, scale, pos_out, val_out,
                              coeffs, hash_p, hash_B, bucket_j)
    if kept > 0:
        return kept, 0
    # clustered roots stall the simple iteration; one LAPACK retry via the
    # companion matrix before the dense-grid rescue (negative status flags
    # a slow-path success for diagnostics)
    comp = np.zeros((rank, rank), dtype=np.complex128)
    for i in range(1, rank):
        comp[i, i - 1] = 1.0
    for i in range(rank):
        comp[i, rank - 1] = -coef[i]
    roots = np.linalg.eigvals(comp)
    kept = _roots_to_solution(roots, f, singles, prefixes, companions, w, n, K,
                              snap_tol, verify_tol, scale, pos_out, val_out,
                              coeffs, hash_p, hash_B, bucket_j)
    if kept > 0:
        return kept, -1
    # near-coincident support coordinates can push the annihilator's roots
    # more than a grid step off; since every true root IS a grid point,
    # score the whole grid by |p(w^p)| and keep the smallest values.  This
    # linear-cost rescue runs only for such pathological buckets.
    n_cand = min(2 * rank, K)
    cand = np.zeros(n_cand, dtype=np.int64)
    cand_val = np.full(n_cand, np.inf)
    ang0 = -2.0 * np.pi / n
    for p in range(n):
        z = complex(np.cos(ang0 * p), np.sin(ang0 * p))
        pv = 1.0 + 0.0j
        for j in range(rank - 1, -1, -1):
            pv = pv * z + coef[j]
        mag = abs(pv)
        if mag < cand_val[n_cand - 1]:
            i = n_cand - 1
            while i > 0 and cand_val[i - 1] > mag:
                cand_val[i] = cand_val[i - 1]
                cand[i] = cand[i - 1]
                i -= 1
            cand_val[i] = mag
            cand[i] = p
    grid_roots = np.empty(n_cand, dtype=np.complex128)
    for i in range(n_cand):
        grid_roots[i] = complex(np.cos(ang0 * cand[i]), np.sin(ang0 * cand[i]))
    kept = _roots_to_solution(grid_roots, f, singles, prefixes, companions, w, n, K,
                              snap_tol, verify_tol, scale, pos_out, val_out,
                              coeffs, hash_p, hash_B, bucket_j)
    if kept > 0:
        return kept, -2
    return 0, 2


@njit(cache=True)
def _roots_to_solution(roots, f, singles, prefixes, companions, w, n, K,
                       snap_tol, verify_tol, scale, pos_out, val_out,
                       coeffs, hash_p, hash_B, bucket_j):
    """Snap roots, fit values, verify; returns kept count (0 = failed)."""
    two_k = len(f)
    rank = len(roots)
    # off-grid roots are numerically spurious and carry ~zero amplitude:
    # drop them (and wrong-bucket snaps) and let verification adjudicate
    count = 0
    for i in range(rank):
        p = int(round(-np.arctan2(roots[i].imag, roots[i].real) * n / (2.0 * np.pi))) % n
        snapped = complex(np.cos(-2.0 * np.pi * p / n), np.sin(-2.0 * np.pi * p / n))
        if abs(roots[i] - snapped) > snap_tol:
            continue
        if bucket_j >= 0 and _hash_one(coeffs, hash_p, hash_B, p) != bucket_j:
            continue
        dup = False
        for j in range(count):
            if pos_out[j] == p:
                dup = True
                break
        if not dup:
            pos_out[count] = p
            count += 1
    if count == 0 or count > K:
        return 0

    # Vandermonde columns by power recurrence (sincos only once per root)
    base_pow = np.empty(count, dtype=np.complex128)
    for j in range(count):
        ang = -2.0 * np.pi * pos_out[j] / n
        base_pow[j] = complex(np.cos(ang), np.sin(ang))
    V = np.empty((two_k, count), dtype=np.complex128)
    for j in range(count):
        V[0, j] = 1.0 + 0.0j
    for m in range(1, two_k):
        for j in range(count):
            V[m, j] = V[m - 1, j] * base_pow[j]
    # QR, not normal equations: clustered roots make V ill-conditioned and
    # squaring the condition number would break the verification tolerance
    vals, ok = _lstsq_qr(V, f)
    if not ok:
        return 0
    vmax = 0.0
    for j in range(count):
        if abs(vals[j]) > vmax:
            vmax = abs(vals[j])
    kept = 0
    for j in range(count):
        if abs(vals[j]) > 1e-8 * vmax:
            pos_out[kept] = pos_out[j]
            val_out[kept] = vals[j]
            V[:, kept] = V[:, j]
            kept += 1

    # verify against every measured magnitude
    s = 0.0 + 0.0j
    for m in range(two_k):
        fm = 0.0 + 0.0j
        for j in range(kept):
            fm += val_out[j] * V[m, j]
        if abs(abs(fm) - singles[m]) > verify_tol * scale:
            return 0
        wf = w[m] * fm
        s += wf
        if abs(abs(s) - prefixes[m]) > verify_tol * scale:
            return 0
        if m >= 1:
            if abs(abs((s - wf) + 1j * wf) - companions[m - 1]) > verify_tol * scale:
                return 0
    return kept


@njit(cache=True)
def hash_eval_kernel(coeffs, p, B, idx, out):
    """Horner evaluation of the polynomial hash over an index array."""
    up = np.uint64(p)
    for t in range(len(idx)):
        acc = np.uint64(0)
        iu = np.uint64(idx[t]) % up
        for j in range(len(coeffs) - 1, -1, -1):
            acc = (acc * iu + coeffs[j]) % up
        out[t] = np.int64(acc % np.uint64(B))


@njit(cache=True)
def stitch_edges_kernel(supp, mags, angles, owner, layer_base, m, rate,
                        bits_state, n, y0, y1,
                        counts, first, second,
                        out_a, out_b, out_off):
    """Two-hit rows of one stitch layer -> oriented bucket-offset edges.

    counts/first/second are scratch arrays of length m.  Returns the number
    of edges written.  Mirrors the reference pipeline: same-bucket pairs and
    equal-companion-bit pairs are dropped; cos from the plain row, sin from
    the quarter-turn row, atan2 orientation.
    """
    for q in range(m):
        counts[q] = 0
    log1m = np.log1p(-rate)
    for ci in range(len(supp)):
        col = np.uint64(supp[ci])
        cstate = _fold(layer_base, col)
        pos = -1
        draw = np.uint64(0)
        while True:
            u = (float(_mix64(_fold(cstate, draw)) >> np.uint64(11)) + 0.5) / TWO53
            pos += 1 + int(np.log(u) / log1m)
            if pos >= m:
                break
            if counts[pos] == 0:
                first[pos] = ci
            elif counts[pos] == 1:
                second[pos] = ci
            counts[pos] += 1
            draw += np.uint64(1)
    top = 0
    for q in range(m):
        if counts[q] != 2:
            continue
        ui = first[q]
        vi = second[q]
        a = owner[ui]
        b = owner[vi]
        if a == b:
            continue
        addr_u = np.uint64(q) * np.uint64(n) + np.uint64(supp[ui])
        addr_v = np.uint64(q) * np.uint64(n) + np.uint64(supp[vi])
        bit_u = (_mix64(_fold(bits_state, addr_u)) >> np.uint64(11)) < HALF_THRESHOLD
        bit_v = (_mix64(_fold(bits_state, addr_v)) >> np.uint64(11)) < HALF_THRESHOLD
        if bit_u == bit_v:
            continue
        mu = mags[ui]
        mv = mags[vi]
        if mu <= 0.0 or mv <= 0.0:
            continue
        denom = 2.0 * mu * mv
        cos_d = (y0[q] * y0[q] - mu * mu - mv * mv) / denom
        sin_d = (mu * mu + mv * mv - y1[q] * y1[q]) / denom
        if bit_u:
            sin_d = -sin_d
        if abs(cos_d) > 1.0 + 1e-6 or abs(sin_d) > 1.0 + 1e-6:
            continue
        delta = np.arctan2(sin_d, cos_d)
        off = delta - (angles[vi] - angles[ui])
        out_a[top] = a
        out_b[top] = b
        out_off[top] = off % (2.0 * np.pi)
        top += 1
    return top


@njit(cache=True)
def dfs_kernel(ea, eb, off, B):
    """Offset propagation over the bucket graph; roots at phase 0.

    Returns (phases, component labels).  Matches graph.dfs_propagate for
    edge semantics: off = phase(b) - phase(a)."""
    two_pi = 2.0 * np.pi
    ne = len(ea)
    head = np.full(B, -1, dtype=np.int64)
    nxt = np.empty(2 * ne, dtype=np.int64)
    to = np.empty(2 * ne, dtype=np.int64)
    wt = np.empty(2 * ne, dtype=np.float64)
    for i in range(ne):
        a, b, d = ea[i], eb[i], off[i]
        to[2 * i] = b
        wt[2 * i] = d
        nxt[2 * i] = head[a]
        head[a] = 2 * i
        to[2 * i + 1] = a
        wt[2 * i + 1] = -d
        nxt[2 * i + 1] = head[b]
        head[b] = 2 * i + 1
    phases = np.zeros(B)
    comp = np.full(B, -1, dtype=np.int64)
    stack = np.empty(B, dtype=np.int64)
    cid = 0
    for root in range(B):
        if comp[root] >= 0:
            continue
        comp[root] = cid
        phases[root] = 0.0
        stack[0] = root
        top = 1
        while top > 0:
            top -= 1
            u = stack[top]
            e = head[u]
            while e >= 0:
                v = to[e]
                if comp[v] < 0:
                    comp[v] = cid
                    phases[v] = (phases[u] + wt[e]) % two_pi
                    stack[top] = v
                    top += 1
                e = nxt[e]
        cid += 1
    return phases, comp


@njit(cache=True)
def solve_buckets_batch(singles, prefixes, companions, w, n, K,
                        snap_tol, verify_tol, pos_out, val_out, counts, statuses,
                        coeffs, hash_p, hash_B):
    """All buckets in one call; outputs are (B, K+1) row-major blocks."""
    B = singles.shape[0]
    for j in range(B):
        cnt, st = solve_bucket_kernel(
            singles[j], prefixes[j], companions[j], w, n, K,
            snap_tol, verify_tol, pos_out[j], val_out[j],
            coeffs, hash_p, hash_B, j,
        )
        counts[j] = cnt
        statuses[j] = st


@njit(cache=True)
def _hash_one(coeffs, p, B, i):
    acc = np.uint64(0)
    up = np.uint64(p)
    iu = np.uint64(i) % up
    for j in range(len(coeffs) - 1, -1, -1):
        acc = (acc * iu + coeffs[j]) % up
    return np.int64(acc % np.uint64(B))


@njit(cache=True)
def decode_kernel(singles, prefixes, companions, w, n, K, B,
                  snap_tol, verify_tol,
                  coeffs, hash_p, hash_B,
                  lev_m, lev_rate, lev_base, lev_bits, y0cat, y1cat, lev_off,
                  c_R, L_max,
                  supp_out, val_out, psi_out, sizes_out, info_out):
    """Single-call decode: bucket solves, stitching, majority, assembly.

    info_out: [status, supp_count, edges_used, groups, slow_retries].
    status: 0 ok, 1 unsat, 2 defer to the reference implementation.
    """
    two_k = 2 * K
    cap = K + 1
    pos_buf = np.empty((B, cap), dtype=np.int64)
    val_buf = np.empty((B, cap), dtype=np.complex128)
    counts = np.empty(B, dtype=np.int64)
    info_out[4] = 0
    for j in range(B):
        cnt, st = solve_bucket_kernel(
            singles[j], prefixes[j], companions[j], w, n, K,
            snap_tol, verify_tol, pos_buf[j], val_buf[j],
            coeffs, hash_p, hash_B, j,
        )
        if st < 0:  # solved, but only after slow retries
            info_out[4] += -st
            st = 0
        if st != 0:
            info_out[0] = st
            return
        counts[j] = cnt
        sizes_out[j] = cnt

    total = 0
    for j in range(B):
        for t in range(counts[j]):
            # membership re-verification: the coordinate must hash back
            # here; a violation means an aliased bucket solution slipped
            # through, which the reference solver adjudicates
            if _hash_one(coeffs, hash_p, hash_B, pos_buf[j, t]) != j:
                info_out[0] = 2
                return
            supp_out[total] = pos_buf[j, t]
            val_out[total] = val_buf[j, t]
            total += 1
    info_out[1] = total
    if total == 0:
        info_out[0] = 0
        return
    # insertion sort by coordinate (supports are tiny)
    for i in range(1, total):
        sp = supp_out[i]
        vv = val_out[i]
        j = i - 1
        while j >= 0 and supp_out[j] > sp:
            supp_out[j + 1] = supp_out[j]
            val_out[j + 1] = val_out[j]
            j -= 1
        supp_out[j + 1] = sp
        val_out[j + 1] = vv

    owner = np.empty(total, dtype=np.int64)
    for i in range(total):
        owner[i] = _hash_one(coeffs, hash_p, hash_B, supp_out[i])
    occ_mask = np.zeros(B, dtype=np.bool_)
    for i in range(total):
        occ_mask[owner[i]] = True
    n_occ = 0
    occ = np.empty(B, dtype=np.int64)
    for b in range(B):
        if occ_mask[b]:
            occ[n_occ] = b
            n_occ += 1

    for b in range(B):
        psi_out[b] = 0.0
    if n_occ <= 1 or total <= 1:
        info_out[0] = 0
        return

    # stitch levels: primary first, then neighbours until enough edges
    ell = 1
    while (1 << ell) < total and ell < L_max:
        ell += 1
    mags = np.empty(total)
    angs = np.empty(total)
    for i in range(total):
        mags[i] = abs(val_out[i])
        angs[i] = np.arctan2(val_out[i].imag, val_out[i].real)
    max_edges = 0
    for li in range(len(lev_m)):
        max_edges += lev_m[li]
    ea = np.empty(max_edges, dtype=np.int64)
    eb = np.empty(max_edges, dtype=np.int64)
    eo = np.empty(max_edges, dtype=np.float64)
    scr_c = np.zeros(np.max(lev_m), dtype=np.int64)
    scr_f = np.zeros(np.max(lev_m), dtype=np.int64)
    scr_s = np.zeros(np.max(lev_m), dtype=np.int64)
    n_edges = 0
    enough = 6 * n_occ
    for pick in range(3):
        lev = ell if pick == 0 else (ell - 1 if pick == 1 else ell + 1)
        if lev < 1 or lev > L_max or n_edges >= enough:
            continue
        li = lev - 1
        m = lev_m[li]
        got = stitch_edges_kernel(
            supp_out[:total], mags, angs, owner,
            lev_base[li], m, lev_rate[li], lev_bits[li], n,
            y0cat[lev_off[li]: lev_off[li] + m],
            y1cat[lev_off[li]: lev_off[li] + m],
            scr_c[:m], scr_f[:m], scr_s[:m],
            ea[n_edges:], eb[n_edges:], eo[n_edges:],
        )
        n_edges += got
    info_out[2] = n_edges
    if n_edges == 0:
        info_out[0] = 3
        return

    group_size = int(round(c_R * ell * (1 << ell)))
    if group_size < 1:
        group_size = 1
    n_groups = n_edges // group_size if n_edges >= group_size else 1
    if n_groups < 1:
        n_groups = 1
    info_out[3] = n_groups
    pat = np.empty((n_groups, n_occ))
    pat_ok = np.zeros(n_groups, dtype=np.bool_)
    for gi in range(n_groups):
        lo = gi * group_size
        hi = lo + group_size
        if n_groups == 1:
            lo, hi = 0, n_edges
        elif gi == n_groups - 1:
            hi = n_edges if (n_groups * group_size) > n_edges else hi
        assign, comp = dfs_kernel(ea[lo:hi], eb[lo:hi], eo[lo:hi], B)
        c0 = comp[occ[0]]
        connected = True
        for t in range(1, n_occ):
            if comp[occ[t]] != c0:
                connected = False
                break
        if not connected:
            continue
        base = assign[occ[0]]
        for t in range(n_occ):
            pat[gi, t] = (assign[occ[t]] - base) % (2.0 * np.pi)
        pat_ok[gi] = True
    any_ok = False
    for gi in range(n_groups):
        if pat_ok[gi]:
            any_ok = True
            break
    if not any_ok:
        info_out[0] = 4
        return
    # majority over quantised patterns, ties to the lexicographically least
    best_gi = -1
    best_count = -1
    for gi in range(n_groups):
        if not pat_ok[gi]:
            continue
        cnt = 0
        for gj in range(n_groups):
            if not pat_ok[gj]:
                continue
            same = True
            for t in range(n_occ):
                if round(pat[gi, t] * 1e6) != round(pat[gj, t] * 1e6):
                    same = False
                    break
            if same:
                cnt += 1
        better = cnt > best_count
        if cnt == best_count and best_gi >= 0:
            for t in range(n_occ):
                a = round(pat[gi, t] * 1e6)
                bq = round(pat[best_gi, t] * 1e6)
                if a != bq:
                    better = a < bq
                    break
        if better:
            best_count = cnt
            best_gi = gi
    for t in range(n_occ):
        psi_out[occ[t]] = pat[best_gi, t]
    for i in range(total):
        ps = psi_out[owner[i]]
        val_out[i] = val_out[i] * complex(np.cos(ps), np.sin(ps))
    info_out[0] = 0


def warmup():
    """Trigger compilation of all kernels on tiny inputs."""
    singles = np.array([1.0, 1.0, 1.0, 1.0])
    w = np.ones(4, dtype=np.complex128)
    f = np.cumsum(w * 1.0)
    pos = np.empty(4, dtype=np.int64)
    val = np.empty(4, dtype=np.complex128)
    dummy = np.array([0, 1], dtype=np.uint64)
    solve_bucket_kernel(np.abs(np.ones(4)), np.abs(f), np.abs(f[:-1] + 1j), w,
                        16, 2, 1e-6, 1e-9, pos, val, dummy, 17, 2, -1)
    rows = np.empty(64, dtype=np.int64)
    cols = np.empty(64, dtype=np.int64)
    column_rows_kernel(np.uint64(1234), np.array([0, 1], dtype=np.int64), 8, 0.5, rows, cols)
    out = np.empty(2, dtype=np.bool_)
    companion_bits_kernel(np.uint64(99), 16, np.array([0, 1]), np.array([2, 3]), out)
    hout = np.empty(3, dtype=np.int64)
    hash_eval_kernel(np.array([1, 2], dtype=np.uint64), 7, 3, np.array([0, 1, 2]), hout)
    m = 16
    stitch_edges_kernel(
        np.array([1, 5], dtype=np.int64), np.array([1.0, 1.0]),
        np.array([0.0, 0.0]), np.array([0, 1], dtype=np.int64),
        np.uint64(7), m, 0.25, np.uint64(8), 16,
        np.ones(m), np.ones(m),
        np.zeros(m, dtype=np.int64), np.zeros(m, dtype=np.int64),
        np.zeros(m, dtype=np.int64),
        np.empty(m, dtype=np.int64), np.empty(m, dtype=np.int64), np.empty(m),
    )
