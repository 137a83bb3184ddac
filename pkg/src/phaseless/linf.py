"""Coordinate-wise (linf/l2) recovery for phase-compliant signals.

The sensing matrix layers a heavy-hitter sketch, a Count-Sketch, a single
sparse gaussian pivot row rho, and R repetitions of rotated-pivot-plus-
bucket rows.  Decoding identifies candidates, point-queries magnitudes,
thresholds against the pivot magnitude L (an implicit tail estimate), then
estimates every survivor's phase relative to the pivot and aligns the whole
pattern to the valid phase set.  When L = 0 the signal has no tail and the
exact sparse decoder takes over.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np

from . import AlignmentFailure
from .constants import DEFAULT
from .exact import NoiselessEnsemble, noiseless_decode
from .measurements import PhaselessMeasurements
from .phases import PhaseEstimationError, circular_median, estimate_full_phase
from .seeded import HashFamily, as_stream
from .signals import PhaseSet, SparseApprox, circ_dist, wrap_angle
from .sketches import CountSketchEnsemble, HHEnsemble


@dataclass
class LinfDiagnostics:
    S: np.ndarray = None
    S_prime: np.ndarray = None
    L: float = 0.0
    thetas: dict = field(default_factory=dict)
    chosen_p: float | None = None
    used_noiseless: bool = False
    dropped: int = 0


class LinfEnsemble:
    def __init__(self, n: int, k: int, P: PhaseSet, seed, consts=None):
        consts = consts or DEFAULT
        cfg = consts.mod("linf")
        self.n, self.k, self.P = int(n), int(k), P
        self.c = consts.c
        self.eps = min(P.eta / (5 * self.c), np.pi / (9 * self.c))
        assert 2 * self.c * self.eps < P.eta / 2  # rounding radius stays valid
        self.C0 = float(cfg["C0"])
        self.C2 = int(cfg["C2"])
        self.R = int(cfg["reps"])
        self.B = max(2, int(np.ceil(cfg["C_B"] * k / self.eps)))
        self.stream = as_stream(seed, "linf")
        self.hh = HHEnsemble(n, K=k, seed=self.stream.derive("hh"))
        self.cs = CountSketchEnsemble(
            n, K=max(1, int(np.ceil(cfg["C_cs"] * k / self.eps))),
            seed=self.stream.derive("cs"),
        )
        # pivot row rho: eta_i * g_i, both shared with the Phi_r layers
        idx = np.arange(n, dtype=np.uint64)
        self.eta = self.stream.bernoulli_array(1.0 / (self.C0 * k), idx, 0)
        self.g = self.stream.gaussian_array(idx, 1)
        self.rho = np.where(self.eta, self.g, 0.0)
        self.hashes = [
            HashFamily.from_stream(self.stream, 2, n, self.B, 2, r) for r in range(self.R)
        ]
        self._h = np.stack([h.eval_array(np.arange(n)) for h in self.hashes])
        self._sigma = np.stack(
            [self.stream.sign_array(idx, 3, r) for r in range(self.R)]
        )
        self.noiseless = NoiselessEnsemble(
            n, self.C2 * k, seed=self.stream.derive("noiseless"), consts=consts
        )
        self._rots = np.exp(
            1j * (2 * self.c * self.eps * np.arange(2)[:, None] + (np.pi / 2) * np.arange(2)[None, :])
        )  # shape (j, l)

    @property
    def m(self) -> int:
        return self.hh.m + self.cs.m + 1 + self.R * 4 * self.B + self.noiseless.m

    def measure(self, x: np.ndarray, lazy: bool = True) -> PhaselessMeasurements:
        """Magnitude measurements; the exact-decoder sub-block is deferred to
        a lazy thunk by default (it is only read on the L = 0 branch and its
        values are identical either way)."""
        if len(x) != self.n:
            raise ValueError("dimension mismatch")
        x = np.asarray(x, dtype=np.complex128)
        blocks = {}
        for name, arr in self.hh.measure(x).blocks.items():
            blocks[name] = arr
        blocks["cs"] = self.cs.measure(x)["cs"]
        pivot = complex(np.sum(self.rho * x))
        blocks["pivot"] = np.array([abs(pivot)])
        masked = (1.0 - self.eta) * x
        for r in range(self.R):
            bucket = np.zeros(self.B, dtype=np.complex128)
            np.add.at(bucket, self._h[r], self._sigma[r] * masked)
            # (j, l, b): |e^{i(2 c eps j + pi/2 l)} pivot + bucket_b|
            blocks[f"rot_{r}"] = np.abs(self._rots[:, :, None] * pivot + bucket[None, None, :])
        if lazy:
            xc = x.copy()
            return PhaselessMeasurements(
                blocks, lazy={"nl": lambda: self.noiseless.measure(xc)}
            )
        for name, arr in self.noiseless.measure(x).blocks.items():
            blocks[f"nl_{name}"] = arr
        return PhaselessMeasurements(blocks)

    def dense(self) -> np.ndarray:
        rows = [self.hh.dense(), self.cs.dense(), self.rho[None, :].astype(complex)]
        idx = np.arange(self.n)
        for r in range(self.R):
            H = np.zeros((self.B, self.n), dtype=np.complex128)
            H[self._h[r], idx] = (1.0 - self.eta) * self._sigma[r]
            for j in range(2):
                for l in range(2):
                    rows.append(self._rots[j, l] * self.rho[None, :] + H)
        rows.append(self.noiseless.dense())
        return np.concatenate(rows, axis=0)

    def to_config(self) -> dict:
        return {"type": "linf", "n": self.n, "k": self.k, "eps": self.eps,
                "B": self.B, "R": self.R, "m": self.m}


def compute_L(y: PhaselessMeasurements) -> float:
    """The pivot magnitude |<rho, x>| (squared, it sandwiches the tail energy)."""
    return float(y["pivot"][0])


def linf_decode(y: PhaselessMeasurements, ens: LinfEnsemble, P: PhaseSet | None = None):
    """Run the candidate/threshold/phase-align pipeline.

    Returns (SparseApprox, LinfDiagnostics).  Raises AlignmentFailure when no
    rotation of the valid phase set fits all estimated phases.
    """
    P = P or ens.P
    diag = LinfDiagnostics()
    S = ens.hh.identify(y)
    mags = np.atleast_1d(ens.cs.point_query(y, S))
    L = compute_L(y)
    diag.S, diag.L = S, L
    keep = mags >= L
    S_prime = S[keep]
    mags_p = mags[keep]
    diag.S_prime = S_prime

    if L == 0.0:
        diag.used_noiseless = True
        if "nl" in y.lazy:
            nl = y.lazy["nl"]()
        else:
            nl = PhaselessMeasurements(
                {name[3:]: arr for name, arr in y.blocks.items() if name.startswith("nl_")}
            )
        xh, _ = noiseless_decode(nl, ens.noiseless)
        return xh, diag

    # phase of every survivor relative to the pivot, median over repetitions
    phi = {}
    for pos, i in enumerate(S_prime.tolist()):
        if ens.eta[i]:
            continue  # masked out of the bucket layers by construction
        ests = []
        for r in range(ens.R):
            b = ens._h[r, i]
            if np.count_nonzero(ens._h[r, S_prime] == b) != 1:
                continue  # i collides with another survivor under h_r
            table = y[f"rot_{r}"][:, :, b]
            try:
                est = estimate_full_phase(mags_p[pos], L, table, ens.eps, ens.c)
            except PhaseEstimationError:
                continue
            # est.theta = arg(pivot) - arg(sigma_ri x_i); flip to x_i's frame
            val = -est.theta
            if ens._sigma[r, i] < 0:
                val -= np.pi
            ests.append(wrap_angle(val))
        if ests:
            phi[i] = circular_median(ests)
    diag.thetas = phi
    kept = np.array([i for i in S_prime.tolist() if i in phi], dtype=np.int64)
    diag.dropped = len(S_prime) - len(kept)
    if len(kept) == 0:
        raise AlignmentFailure("no survivor obtained a phase estimate")
    kept_mags = mags_p[np.isin(S_prime, kept)]
    phi_arr = np.array([phi[i] for i in kept.tolist()])

    i0 = int(np.argmax(kept_mags))
    for p in P.phases:
        theta = wrap_angle(p + phi_arr - phi_arr[i0])
        rounded, dist = P.round(theta)
        if np.all(dist <= P.eta / 2 + 1e-12):
            diag.chosen_p = float(p)
            vals = kept_mags * np.exp(1j * rounded)
            return SparseApprox(kept, vals), diag
    raise AlignmentFailure("no rotation of the phase set was accepted")


def corollary_l2_decode(n: int, k: int, eps: float, P: PhaseSet, x, seed, consts=None):
    """l2/l2 via the linf machinery at inflated sparsity k / min(eta, eps).

    Convenience wrapper (measure + decode in one go); returns the sparse
    approximation, whose l2 error obeys the (1+eps) tail bound whenever the
    linf guarantee holds at the inflated sparsity.
    """
    k_inf = max(k, int(np.ceil(k / min(P.eta, eps))))
    ens = LinfEnsemble(n, k_inf, P, seed, consts=consts)
    return linf_decode(ens.measure(x), ens), ens
