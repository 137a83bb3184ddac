"""Signal and phase-set domain types, generators, and up-to-rotation metrics.

All recovery guarantees in this library are modulo a global phase: x and
e^{i*theta}*x produce identical magnitude measurements, so errors are always
minimised over that rotation.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .seeded import SeededStream

TWO_PI = 2.0 * np.pi

_BIN_MAGIC = b"CPRSIG01"


class ConfigError(ValueError):
    """Invalid generator / experiment configuration."""


def circ_dist(a, b):
    """Unoriented circular distance on [0, 2*pi)."""
    d = np.abs(np.mod(a, TWO_PI) - np.mod(b, TWO_PI))
    return np.minimum(d, TWO_PI - d)


def wrap_angle(a):
    """Reduce an angle (or array) into [0, 2*pi)."""
    return np.mod(a, TWO_PI)


class ComplexSignal:
    """Dense length-n complex vector; immutable after construction."""

    __slots__ = ("n", "values")

    def __init__(self, values):
        values = np.asarray(values, dtype=np.complex128).copy()
        if values.ndim != 1:
            raise ValueError("signal must be one-dimensional")
        if not np.all(np.isfinite(values.view(np.float64))):
            raise ValueError("signal entries must be finite")
        values.setflags(write=False)
        self.n = len(values)
        self.values = values

    def magnitudes(self) -> np.ndarray:
        return np.abs(self.values)

    # -- serialisation ------------------------------------------------------

    def to_json(self) -> str:
        entries = [[v.real, v.imag] for v in self.values.tolist()]
        return json.dumps({"n": self.n, "entries": entries})

    @classmethod
    def from_json(cls, text: str) -> "ComplexSignal":
        obj = json.loads(text)
        vals = np.array([complex(re, im) for re, im in obj["entries"]])
        if len(vals) != obj["n"]:
            raise ValueError("length mismatch in signal JSON")
        return cls(vals)

    def to_binary(self) -> bytes:
        head = _BIN_MAGIC + struct.pack("<Q", self.n)
        body = np.empty(2 * self.n)
        body[0::2] = self.values.real
        body[1::2] = self.values.imag
        return head + body.astype("<f8").tobytes()

    @classmethod
    def from_binary(cls, blob: bytes) -> "ComplexSignal":
        if blob[:8] != _BIN_MAGIC:
            raise ValueError("bad signal header")
        (n,) = struct.unpack("<Q", blob[8:16])
        flat = np.frombuffer(blob[16:], dtype="<f8")
        if len(flat) != 2 * n:
            raise ValueError("truncated signal payload")
        return cls(flat[0::2] + 1j * flat[1::2])


class SparseApprox:
    """Sparse approximation: distinct support indices plus complex values."""

    __slots__ = ("support", "values")

    def __init__(self, support, values):
        support = np.asarray(support, dtype=np.int64)
        values = np.asarray(values, dtype=np.complex128)
        if len(support) != len(values):
            raise ValueError("support/values length mismatch")
        if len(np.unique(support)) != len(support):
            raise ValueError("support indices must be distinct")
        order = np.argsort(support)
        self.support = support[order]
        self.values = values[order]

    @classmethod
    def zero(cls) -> "SparseApprox":
        return cls(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.complex128))

    def to_dense(self, n: int) -> np.ndarray:
        if len(self.support) and (self.support.min() < 0 or self.support.max() >= n):
            raise ValueError("support index out of range")
        out = np.zeros(n, dtype=np.complex128)
        out[self.support] = self.values
        return out

    def __len__(self):
        return len(self.support)


class PhaseSet:
    """Finite sorted subset of the circle with minimum gap eta.

    Holds the valid phases for head coordinates.  ``eta`` lower-bounds every
    circular gap including the wraparound one.
    """

    __slots__ = ("phases", "eta", "equidistant")

    def __init__(self, phases, eta: float, equidistant: bool | None = None):
        phases = np.sort(wrap_angle(np.asarray(phases, dtype=np.float64)))
        if len(phases) == 0:
            raise ValueError("phase set must be non-empty")
        if eta <= 0:
            raise ValueError("eta must be positive")
        gaps = self._gaps(phases)
        if len(phases) > 1 and gaps.min() < eta - 1e-12:
            raise ValueError("circular gap below eta")
        if equidistant is None:
            equidistant = len(phases) == 1 or np.ptp(gaps) < 1e-9
        elif equidistant and len(phases) > 1 and np.ptp(gaps) >= 1e-9:
            raise ValueError("phases are not equidistant")
        phases.setflags(write=False)
        self.phases = phases
        self.eta = float(eta)
        self.equidistant = bool(equidistant)

    @staticmethod
    def _gaps(phases):
        if len(phases) == 1:
            return np.array([TWO_PI])
        d = np.diff(phases)
        return np.append(d, TWO_PI - (phases[-1] - phases[0]))

    @classmethod
    def equidistant_set(cls, m: int, offset: float = 0.0) -> "PhaseSet":
        gap = TWO_PI / m
        return cls(offset + gap * np.arange(m), eta=gap, equidistant=True)

    @property
    def gap(self) -> float:
        return TWO_PI / len(self.phases) if self.equidistant else float("nan")

    def round(self, theta):
        """Nearest phase under circular distance, ties to the smaller phase."""
        theta = np.asarray(theta, dtype=np.float64)
        scalar = theta.ndim == 0
        t = np.atleast_1d(theta)
        d = circ_dist(t[:, None], self.phases[None, :])
        idx = np.argmin(np.round(d, 12), axis=-1)  # round: ties -> lower index
        p = self.phases[idx]
        dist = circ_dist(t, p)
        return (float(p[0]), float(dist[0])) if scalar else (p, dist)

    def index_of(self, theta) -> np.ndarray:
        d = circ_dist(np.asarray(theta)[..., None], self.phases[None, :])
        return np.argmin(np.round(d, 12), axis=-1)


def is_eta_distinct(phases, eta: float):
    """Check the two-part rigidity condition for a raw phase list.

    (i) all pairwise circular gaps are >= eta; (ii) rotating the set so that
    phase i lands on phase j either reproduces the set exactly or leaves some
    rotated phase at circular distance >= eta from the set.  Returns
    (ok, witness) where witness is a violating (i, j, l) triple or pair.
    """
    P = wrap_angle(np.asarray(phases, dtype=np.float64))
    m = len(P)
    if m == 0:
        raise ValueError("empty phase set")
    for i in range(m):
        for j in range(m):
            if i != j and circ_dist(P[i], P[j]) < eta - 1e-12:
                return False, ("gap", i, j)
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            rotated = wrap_angle(P + P[j] - P[i])
            dmax = max(float(np.min(circ_dist(r, P))) for r in rotated)
            if not (dmax < 1e-12 or (eta - 1e-12 <= dmax <= np.pi + 1e-12)):
                ell = int(np.argmax([np.min(circ_dist(r, P)) for r in rotated]))
                return False, ("rotation", i, j, ell)
    return True, None


# -- heads, tails, metrics ---------------------------------------------------


def head_indices(x: ComplexSignal, k: int) -> np.ndarray:
    """Indices (0-based) of the k largest-magnitude coordinates, ties to lower index."""
    if not (0 <= k <= x.n):
        raise ValueError(f"k={k} out of range for n={x.n}")
    order = np.argsort(-x.magnitudes(), kind="stable")
    return np.sort(order[:k])


def tail_norm(x: ComplexSignal, k: int, p: int = 2) -> float:
    """Norm of x with its k largest coordinates zeroed out."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    heads = head_indices(x, k)
    rest = np.delete(x.magnitudes(), heads)
    return float(np.sum(rest)) if p == 1 else float(np.sqrt(np.sum(rest**2)))


def _as_dense(x: ComplexSignal, xhat) -> np.ndarray:
    if isinstance(xhat, SparseApprox):
        return xhat.to_dense(x.n)
    return np.asarray(xhat, dtype=np.complex128)


def phase_error(x: ComplexSignal, xhat, norm: str = "l2") -> float:
    """min over the global rotation theta of ||x - e^{i theta} xhat||.

    l2 uses the closed-form optimum; linf refines around that seed with
    golden-section search; l1_real minimises over theta in {0, pi} and
    requires real inputs.
    """
    xv = x.values
    hv = _as_dense(x, xhat)
    if norm == "l1_real":
        if np.abs(xv.imag).max(initial=0) > 1e-12 or np.abs(hv.imag).max(initial=0) > 1e-12:
            raise ValueError("l1_real requires real-valued signals")
        return float(min(np.abs(xv - hv).sum(), np.abs(xv + hv).sum()))

    g = np.sum(np.conj(hv) * xv)
    theta_star = float(np.angle(g)) if abs(g) > 0 else 0.0
    if norm == "l2":
        return float(np.linalg.norm(xv - np.exp(1j * theta_star) * hv))
    if norm != "linf":
        raise ValueError(f"unknown norm {norm!r}")

    def f(t):
        return float(np.abs(xv - np.exp(1j * t) * hv).max(initial=0))

    lo, hi = theta_star - np.pi / 2, theta_star + np.pi / 2
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c_, d_ = b - gr * (b - a), a + gr * (b - a)
    fc, fd = f(c_), f(d_)
    while b - a > 1e-9:
        if fc < fd:
            b, d_, fd = d_, c_, fc
            c_ = b - gr * (b - a)
            fc = f(c_)
        else:
            a, c_, fc = c_, d_, fd
            d_ = a + gr * (b - a)
            fd = f(d_)
    return min(fc, fd, f(theta_star))


# -- generators ---------------------------------------------------------------


@dataclass(frozen=True)
class SignalSpec:
    """Configuration for planted test signals.

    The k head coordinates get phases from ``phase_set`` and magnitudes in
    ``magnitude_range``; the tail follows ``tail_model`` with free phases
    (forced to 0 when ``nonnegative``).  Tail magnitudes are kept below the
    smallest head magnitude so the planted support is exactly the head set.
    """

    n: int
    k: int
    phase_set: PhaseSet
    magnitude_range: tuple = (1.0, 2.0)
    tail_model: str = "zero"  # zero | gaussian | power_law
    tail_param: float = 0.0  # gaussian sigma, or power-law exponent alpha
    tail_scale: float = 0.0  # power-law leading magnitude
    nonnegative: bool = False
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.magnitude_range
        if not (0 <= self.k <= self.n):
            raise ConfigError("need 0 <= k <= n")
        if self.k > 0 and lo <= 0:
            raise ConfigError("head magnitude lower bound must be positive")
        if hi < lo:
            raise ConfigError("empty magnitude range")
        if self.tail_model not in ("zero", "gaussian", "power_law"):
            raise ConfigError(f"unknown tail model {self.tail_model!r}")
        if self.tail_model == "gaussian" and self.k > 0 and hi <= self.tail_param:
            raise ConfigError("head/tail separation infeasible: hi <= tail sigma")
        if self.tail_model == "power_law":
            if self.tail_param <= 0:
                raise ConfigError("power-law exponent must be positive")
            if self.k > 0 and self.tail_scale > 0.9 * lo:
                raise ConfigError("power-law scale too close to head magnitudes")


_TAIL_CLIP = 0.9  # tail magnitudes are clipped below clip * lo


def generate(spec: SignalSpec) -> ComplexSignal:
    """Draw the deterministic signal described by ``spec``."""
    s = SeededStream(spec.seed, "signal")
    lo, hi = spec.magnitude_range
    x = np.zeros(spec.n, dtype=np.complex128)

    perm = s.permutation(spec.n, 0)
    support = np.sort(perm[: spec.k])

    if spec.k > 0:
        mags = lo + (hi - lo) * s.uniform_array(np.arange(spec.k, dtype=np.uint64), 1)
        pick = (
            s.u64_array(np.arange(spec.k, dtype=np.uint64), 2)
            % np.uint64(len(spec.phase_set.phases))
        ).astype(np.int64)
        phases = spec.phase_set.phases[pick]
        if spec.nonnegative:
            if np.any(circ_dist(phases, 0.0) > 1e-12):
                raise ConfigError("nonnegative signals need phase set {0}")
        x[support] = mags * np.exp(1j * phases)

    rest = np.setdiff1d(np.arange(spec.n), support, assume_unique=False)
    nrest = len(rest)
    if nrest and spec.tail_model != "zero":
        if spec.tail_model == "gaussian":
            re = spec.tail_param * s.gaussian_array(np.arange(nrest, dtype=np.uint64), 3)
            if spec.nonnegative:
                tail = np.abs(re).astype(np.complex128)
            else:
                im = spec.tail_param * s.gaussian_array(np.arange(nrest, dtype=np.uint64), 4)
                tail = (re + 1j * im) / np.sqrt(2.0)
        else:  # power_law over a random ordering of the tail positions
            ranks = s.permutation(nrest, 5).astype(np.float64)
            mags = spec.tail_scale * (ranks + 2.0) ** (-spec.tail_param)
            if spec.nonnegative:
                tail = mags.astype(np.complex128)
            else:
                tail = mags * np.exp(1j * s.phase_array(np.arange(nrest, dtype=np.uint64), 6))
        if spec.k > 0:
            cap = _TAIL_CLIP * lo
            mag = np.abs(tail)
            over = mag > cap
            if over.any():
                tail[over] *= cap / mag[over]
        x[rest] = tail
    return ComplexSignal(x)
