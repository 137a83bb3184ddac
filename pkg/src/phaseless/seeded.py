"""Replayable seeded randomness, addressable by (layer, row, column).

Every random quantity in the library is a pure function of a 64-bit master
seed, a domain tag and an integer address, computed by a counter-mode
SplitMix64-style mixer.  Nothing is ever stored: re-querying an address
always returns the first value.  This is what makes implicit sensing
matrices possible -- any entry, row or column can be regenerated on demand.

Not cryptographic.  Bit-stable across runs on the same platform; float
outputs (gaussians) additionally depend on libm being identical.
"""

from __future__ import annotations

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_TWO53 = float(1 << 53)

_U_GOLDEN = np.uint64(_GOLDEN)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)


def mix64_int(z: int) -> int:
    """SplitMix64 finalizer on a plain integer (wrapping at 64 bits)."""
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on a uint64 array (wrapping is intended)."""
    with np.errstate(over="ignore"):
        z = z + _U_GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _U_M1
        z = (z ^ (z >> np.uint64(27))) * _U_M2
        return z ^ (z >> np.uint64(31))


def _fold(state: int, word: int) -> int:
    return mix64_int(state ^ ((word * _M1) & _MASK))


def _tag_hash(tag: str) -> int:
    h = 0xCBF29CE484222325
    for b in tag.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & _MASK
    return h


class SeededStream:
    """A named sub-universe of the master seed.

    Addresses are tuples of non-negative integers; the stream value at an
    address is deterministic.  ``derive`` nests tags/addresses so modules
    can hand out disjoint sub-streams without coordination.
    """

    __slots__ = ("base",)

    def __init__(self, seed: int, tag: str = "", _base=None):
        if _base is not None:
            self.base = _base
        else:
            self.base = _fold(mix64_int(seed & _MASK), _tag_hash(tag))

    def derive(self, tag: str, *addr: int) -> "SeededStream":
        b = _fold(self.base, _tag_hash(tag))
        for a in addr:
            b = _fold(b, a)
        return SeededStream(0, _base=b)

    # -- scalar draws -------------------------------------------------------

    def _state(self, addr) -> int:
        b = self.base
        for a in addr:
            b = _fold(b, a)
        return b

    def u64(self, *addr: int) -> int:
        return mix64_int(self._state(addr))

    def uniform(self, *addr: int) -> float:
        return (float(mix64_int(self._state(addr)) >> 11) + 0.5) / _TWO53

    def bernoulli(self, rate: float, *addr: int) -> int:
        if rate <= 0.0:
            return 0
        if rate >= 1.0:
            return 1
        return 1 if self.uniform(*addr) < rate else 0

    def sign(self, *addr: int) -> int:
        return 1 if (mix64_int(self._state(addr)) >> 63) == 0 else -1

    def gaussian(self, *addr: int) -> float:
        u1 = self.uniform(*addr, 0)
        u2 = self.uniform(*addr, 1)
        return float(np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2))

    def phase(self, *addr: int) -> float:
        """Uniform angle in [0, 2*pi)."""
        return 2.0 * np.pi * self.uniform(*addr)

    # -- vectorised draws (bit-identical to the scalar forms) ----------------

    def _fold_array(self, state, words) -> np.ndarray:
        words = np.asarray(words, dtype=np.uint64)
        with np.errstate(over="ignore"):
            return mix64_array(np.uint64(state) ^ (words * _U_M1))

    def u64_array(self, idx, *addr: int) -> np.ndarray:
        st = self._fold_array(self._state(addr), idx)
        return mix64_array(st)

    def uniform_array(self, idx, *addr: int) -> np.ndarray:
        v = self.u64_array(idx, *addr)
        return ((v >> np.uint64(11)).astype(np.float64) + 0.5) / _TWO53

    def sign_array(self, idx, *addr: int) -> np.ndarray:
        v = self.u64_array(idx, *addr)
        return np.where((v >> np.uint64(63)) == 0, 1.0, -1.0)

    def bernoulli_array(self, rate: float, idx, *addr: int) -> np.ndarray:
        if rate <= 0.0:
            return np.zeros(np.shape(idx), dtype=bool)
        if rate >= 1.0:
            return np.ones(np.shape(idx), dtype=bool)
        # integer-domain comparison, equivalent to uniform(idx) < rate
        thr = np.uint64(int(np.ceil(rate * _TWO53 - 0.5)))
        return (self.u64_array(idx, *addr) >> np.uint64(11)) < thr

    def gaussian_array(self, idx, *addr: int) -> np.ndarray:
        # mirrors the scalar path: u_salt = mix(fold(fold(prefix, i), salt))
        st = self._fold_array(self._state(addr), idx)
        with np.errstate(over="ignore"):
            st0 = mix64_array(st)  # fold(st, 0): word 0 contributes nothing
            st1 = mix64_array(st ^ _U_M1)  # fold(st, 1)
        u1 = ((mix64_array(st0) >> np.uint64(11)).astype(np.float64) + 0.5) / _TWO53
        u2 = ((mix64_array(st1) >> np.uint64(11)).astype(np.float64) + 0.5) / _TWO53
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def phase_array(self, idx, *addr: int) -> np.ndarray:
        return 2.0 * np.pi * self.uniform_array(idx, *addr)

    def permutation(self, n: int, *addr: int) -> np.ndarray:
        """Deterministic permutation of [0, n) (argsort of addressed keys)."""
        keys = self.u64_array(np.arange(n, dtype=np.uint64), *addr)
        return np.argsort(keys, kind="stable")


def as_stream(seed, tag: str) -> "SeededStream":
    """Accept either a raw 64-bit seed or a parent stream to derive from."""
    if isinstance(seed, SeededStream):
        return seed.derive(tag)
    return SeededStream(seed, tag)


# -- k-wise independent hashing over a prime field --------------------------


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    for q in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if p % q == 0:
            return p == q
    d, r = p - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, p)
        if x in (1, p - 1):
            continue
        for _ in range(r - 1):
            x = x * x % p
            if x == p - 1:
                break
        else:
            return False
    return True


def next_prime(n: int) -> int:
    p = max(2, n)
    while not _is_prime(p):
        p += 1
    return p


class HashFamily:
    """Degree-(t-1) polynomial hash over GF(p), giving t-wise independence.

    Evaluates ((sum_j c_j * i^j mod p) mod B).  The prime is kept below
    2**31 so Horner steps fit in uint64 without overflow.
    """

    __slots__ = ("t", "p", "B", "coeffs")

    def __init__(self, t: int, p: int, B: int, coeffs):
        if not _is_prime(p):
            raise ValueError(f"p={p} is not prime")
        if p >= (1 << 31):
            raise ValueError("prime too large for uint64 Horner evaluation")
        if p < max(2, B):
            raise ValueError("need p >= max(n, B)")
        coeffs = np.asarray(coeffs, dtype=np.uint64)
        if len(coeffs) != t or np.any(coeffs >= p):
            raise ValueError("need exactly t coefficients in [0, p)")
        self.t, self.p, self.B, self.coeffs = t, p, B, coeffs

    @classmethod
    def from_stream(cls, stream: SeededStream, t: int, n: int, B: int, *addr: int):
        t = max(2, t)
        p = next_prime(max(n, B, 2))
        raw = stream.u64_array(np.arange(t, dtype=np.uint64), *addr)
        return cls(t, p, B, raw % np.uint64(p))

    def __call__(self, i):
        return self.eval_array(i)

    def eval_array(self, i) -> np.ndarray:
        i = np.atleast_1d(np.asarray(i, dtype=np.uint64))
        p = np.uint64(self.p)
        acc = np.full(i.shape, self.coeffs[-1], dtype=np.uint64)
        im = i % p
        for c in self.coeffs[-2::-1]:
            acc = (acc * im + c) % p
        return (acc % np.uint64(self.B)).astype(np.int64)

    def eval_one(self, i: int) -> int:
        acc = 0
        for c in self.coeffs[::-1].tolist():
            acc = (acc * i + int(c)) % self.p
        return acc % self.B


# -- implicit Bernoulli 0/1 layer with per-column enumeration ---------------


class BernoulliLayer:
    """An m x n 0/1 matrix with i.i.d. Bernoulli(rate) entries, stored nowhere.

    The ground truth is defined per column: the nonzero rows of column i are
    produced by geometric gap sampling from the column's sub-stream, which is
    exactly an i.i.d. Bernoulli(rate) row profile.  Row-major views (dense
    materialisation, measurement) are derived from the same column lists, so
    column enumeration and row evaluation agree by construction.
    """

    def __init__(self, stream: SeededStream, m: int, n: int, rate: float):
        if not (0.0 <= rate <= 1.0):
            raise ValueError("rate must be in [0, 1]")
        self.stream = stream
        self.m, self.n, self.rate = int(m), int(n), float(rate)
        self._cache = None
        if 0.0 < rate < 1.0:
            mean = m * rate
            self._chunk = int(np.ceil(mean + 6.0 * np.sqrt(max(mean, 1.0)) + 8.0))
        else:
            self._chunk = 1

    def column_rows(self, i: int) -> np.ndarray:
        """Row indices where column i is nonzero, in increasing order."""
        if self.rate <= 0.0:
            return np.empty(0, dtype=np.int64)
        if self.rate >= 1.0:
            return np.arange(self.m, dtype=np.int64)
        log1m = np.log1p(-self.rate)
        rows = []
        pos = -1
        draw = 0
        while True:
            u = self.stream.uniform_array(
                np.arange(draw, draw + self._chunk, dtype=np.uint64), i
            )
            gaps = np.floor(np.log(u) / log1m).astype(np.int64)
            pts = pos + np.cumsum(gaps + 1)
            keep = pts < self.m
            rows.append(pts[keep])
            if not keep.all():
                return np.concatenate(rows)
            pos = int(pts[-1])
            draw += self._chunk

    def _pairs(self):
        """(cols, rows) index pairs of all nonzero entries (cached).

        Batched across columns with the same per-column addressing as
        ``column_rows``, so both views agree bit-for-bit.
        """
        if self._cache is not None:
            return self._cache
        if self.rate <= 0.0 or self.n == 0:
            empty = np.empty(0, dtype=np.int64)
            self._cache = (empty, empty.copy())
            return self._cache
        if self.rate >= 1.0:
            rows = np.tile(np.arange(self.m, dtype=np.int64), self.n)
            cols = np.repeat(np.arange(self.n, dtype=np.int64), self.m)
            self._cache = (cols, rows)
            return self._cache
        log1m = np.log1p(-self.rate)
        # state per column, then a (n, chunk) grid of draws
        col_states = self.stream._fold_array(
            self.stream._state(()), np.arange(self.n, dtype=np.uint64)
        )
        draws = np.arange(self._chunk, dtype=np.uint64)
        with np.errstate(over="ignore"):
            grid = mix64_array(
                mix64_array(col_states[:, None] ^ (draws[None, :] * _U_M1))
            )
        u = ((grid >> np.uint64(11)).astype(np.float64) + 0.5) / _TWO53
        gaps = np.floor(np.log(u) / log1m).astype(np.int64)
        pts = np.cumsum(gaps + 1, axis=1) - 1
        keep = pts < self.m
        cols = np.repeat(np.arange(self.n, dtype=np.int64), keep.sum(axis=1))
        rows = pts[keep]
        unfinished = np.nonzero(keep.all(axis=1))[0]
        if len(unfinished):  # rare: chunk did not cross m, fall back per column
            extra_c, extra_r = [], []
            for i in unfinished.tolist():
                full = self.column_rows(i)
                extra_r.append(full[full > pts[i, -1]])
                extra_c.append(np.full(len(extra_r[-1]), i, dtype=np.int64))
            cols = np.concatenate([cols] + extra_c)
            rows = np.concatenate([rows] + extra_r)
            order = np.lexsort((rows, cols))
            cols, rows = cols[order], rows[order]
        self._cache = (cols, rows)
        return self._cache

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Exact matrix-vector product (complex allowed)."""
        cols, rows = self._pairs()
        y = np.zeros(self.m, dtype=np.complex128)
        np.add.at(y, rows, x[cols])
        return y

    def dense(self) -> np.ndarray:
        out = np.zeros((self.m, self.n))
        cols, rows = self._pairs()
        out[rows, cols] = 1.0
        return out


def scatter_add(idx, vals, size: int) -> np.ndarray:
    """Segment-sum vals into a complex accumulator (bincount beats ufunc.at)."""
    vals = np.asarray(vals)
    re = np.bincount(idx, weights=vals.real, minlength=size)
    if np.iscomplexobj(vals):
        return re + 1j * np.bincount(idx, weights=vals.imag, minlength=size)
    return re.astype(np.complex128)
