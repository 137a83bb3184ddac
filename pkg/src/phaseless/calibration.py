"""Brute-force oracles that pin the phase-estimation constants.

The estimators' additive-error constants are not derivable in closed form,
so they are measured: dense sweeps over angle, noise direction and relative
noise size drive the estimators against exact complex arithmetic, and the
worst observed ratios (x1.2 safety margin) become the constants file.
"""

from __future__ import annotations

import numpy as np

from .constants import Constants
from .phases import (
    PhaseEstimationError,
    estimate_full_phase,
    estimate_unsigned_phase,
)
from .seeded import SeededStream
from .signals import TWO_PI, circ_dist


def _oracle_cases(consts_grid: dict, seed: int):
    """Yield (eps, ratio, theta, n1, n2, n3) ground-truth instances."""
    s = SeededStream(seed, "phase-oracle")
    thetas = np.linspace(0.0, TWO_PI, consts_grid["theta_points"], endpoint=False)
    ndirs = consts_grid["noise_dirs"]
    for eps in consts_grid["eps"]:
        for r in consts_grid["mag_ratios"]:
            scale = eps * min(1.0, r)
            for ti, theta in enumerate(thetas):
                for d in range(ndirs):
                    idx = np.arange(3, dtype=np.uint64)
                    phis = s.phase_array(idx, ti, d, int(r * 1000), int(eps * 1e6))
                    n1, n2, n3 = scale * np.exp(1j * phis)
                    yield eps, r, float(theta), n1, n2, n3


def _full_phase_errors(consts_grid, seed, c, c0):
    """Max |error|/eps of the full-circle estimator over in-window instances."""
    worst = 0.0
    rejected = 0
    total = 0
    for eps, r, theta, n1, _n2, n3 in _oracle_cases(consts_grid, seed):
        if c * eps > np.pi / 9.0:
            continue
        total += 1
        x = 1.0 + 0j
        y = r * np.exp(1j * theta)
        rots = np.exp(1j * (2.0 * c * eps * np.array([[0.0], [1.0]]) + (np.pi / 2) * np.array([[0.0, 1.0]])))
        table = np.abs(x + rots * y + n1 + n3)
        try:
            est = estimate_full_phase(abs(x + n1), abs(y), table, eps, c, c0)
        except PhaseEstimationError:
            rejected += 1
            continue
        worst = max(worst, circ_dist(est.theta, theta) / eps)
    return worst, rejected, total


def _unsigned_errors(consts_grid, seed, c, c0):
    """Max |error|/sqrt(eps) of the unsigned estimator over all angles."""
    worst = 0.0
    for eps, r, theta, n1, n2, n3 in _oracle_cases(consts_grid, seed):
        x = 1.0 + 0j
        y = r * np.exp(1j * theta)
        est = estimate_unsigned_phase(
            abs(x + n1), abs(y + n2), abs(x + y + n1 + n2 + n3), eps, c, c0
        )
        truth = circ_dist(theta, 0.0)  # unsigned angle in [0, pi]
        worst = max(worst, abs(est.theta - truth) / np.sqrt(eps))
    return worst


def calibrate_phase_constants(base: Constants, seed: int | None = None, margin: float = 1.2):
    """Fixpoint calibration of (c, c0); returns a new Constants plus a report.

    c feeds back into the measurement design (the orientation rotation is
    2*c*eps), so the sweep is iterated until the worst-case ratio is stable.
    """
    seed = base.calibration_seed if seed is None else seed
    grid = base.oracle_grid
    c = base.c
    history = []
    for _ in range(8):
        worst, rejected, total = _full_phase_errors(grid, seed, c, base.c0)
        c_new = margin * worst
        history.append({"c": c, "worst_ratio": worst, "rejected": rejected, "total": total})
        if abs(c_new - c) <= 0.01 * c:
            c = c_new
            break
        c = c_new
    c0 = margin * _unsigned_errors(grid, seed, c, base.c0)
    out = base.copy()
    out.c = round(float(c), 4)
    out.c0 = round(float(c0), 4)
    out.calibration_seed = seed
    return out, {"history": history, "c": out.c, "c0": out.c0}
