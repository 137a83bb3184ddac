"""Benchmark harness: generate -> measure -> decode -> evaluate, with sweeps.

All randomness flows from the config seed, so identical configs reproduce
identical result files byte for byte.  Wall-clock timings are volatile by
nature and therefore live in a separate sidecar (timing.json) that is not
part of the deterministic artifact set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import DecodeFailure, __version__
from .constants import DEFAULT, load_constants, save_constants, strict_paper
from .exact import NoiselessEnsemble, noiseless_decode
from .l1 import L1Ensemble, l1_decode
from .l2 import L2Ensemble, l2_decode
from .linf import LinfEnsemble, linf_decode
from .seeded import SeededStream
from .signals import (
    ComplexSignal,
    ConfigError,
    PhaseSet,
    SignalSpec,
    generate,
    phase_error,
    tail_norm,
)

SCHEMES = ("noiseless", "linf_l2", "l2_l2", "l1_l1")


@dataclass
class ExperimentConfig:
    scheme: str = "noiseless"
    n: int = 1024
    k: int = 8
    eps: float = 0.5
    delta: float = 0.1
    phases: int = 2  # equidistant phase-set size
    magnitude_range: tuple = (1.0, 2.0)
    tail_model: str = "zero"
    tail_param: float = 0.0
    tail_scale: float = 0.0
    trials: int = 10
    seed: int = 0
    threads: int = 1
    constants_path: str | None = None
    strict_paper_constants: bool = False
    sweep: dict = field(default_factory=dict)

    def validate(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme: unknown scheme {self.scheme!r}")
        if self.trials < 1:
            raise ConfigError("trials: must be >= 1")
        if self.k > self.n:
            raise ConfigError("k: must satisfy k <= n")
        if self.scheme == "l1_l1":
            if self.phases != 1 or self.tail_model == "gaussian":
                # nonnegative real signals only
                if self.phases != 1:
                    raise ConfigError("phases: l1_l1 requires phases=1 (nonnegative)")
        if self.scheme == "noiseless" and self.tail_model != "zero":
            raise ConfigError("tail_model: noiseless scheme requires a zero tail")
        return self

    @classmethod
    def from_file(cls, path):
        with open(path) as f:
            obj = json.load(f)
        known = {f_.name for f_ in cls.__dataclass_fields__.values()}
        bad = set(obj) - known
        if bad:
            raise ConfigError(f"unknown config fields: {sorted(bad)}")
        cfg = cls(**obj)
        if isinstance(cfg.magnitude_range, list):
            cfg.magnitude_range = tuple(cfg.magnitude_range)
        return cfg


def _constants(cfg: ExperimentConfig):
    consts = load_constants(cfg.constants_path) if cfg.constants_path else DEFAULT
    if cfg.strict_paper_constants:
        consts = strict_paper(consts)
    return consts


def _phase_set(cfg: ExperimentConfig) -> PhaseSet:
    if cfg.phases == 1:
        return PhaseSet([0.0], eta=2 * np.pi)
    return PhaseSet.equidistant_set(cfg.phases)


def _signal_spec(cfg: ExperimentConfig, trial_seed: int) -> SignalSpec:
    return SignalSpec(
        n=cfg.n, k=cfg.k, phase_set=_phase_set(cfg),
        magnitude_range=tuple(cfg.magnitude_range),
        tail_model=cfg.tail_model, tail_param=cfg.tail_param,
        tail_scale=cfg.tail_scale,
        nonnegative=(cfg.scheme == "l1_l1"),
        seed=trial_seed,
    )


def build_ensemble(cfg: ExperimentConfig, seed, consts):
    P = _phase_set(cfg)
    if cfg.scheme == "noiseless":
        return NoiselessEnsemble(cfg.n, cfg.k, seed, consts=consts)
    if cfg.scheme == "linf_l2":
        return LinfEnsemble(cfg.n, cfg.k, P, seed, consts=consts)
    if cfg.scheme == "l2_l2":
        return L2Ensemble(cfg.n, cfg.k, cfg.eps, cfg.delta, P, seed, consts=consts)
    return L1Ensemble(cfg.n, cfg.k, cfg.eps, seed, consts=consts)


def decode_ensemble(cfg: ExperimentConfig, ens, y):
    if cfg.scheme == "noiseless":
        return noiseless_decode(y, ens)
    if cfg.scheme == "linf_l2":
        return linf_decode(y, ens)
    if cfg.scheme == "l2_l2":
        return l2_decode(y, ens)
    return l1_decode(y, ens)


def evaluate_trial(cfg: ExperimentConfig, x: ComplexSignal, xhat) -> dict:
    dense = xhat.to_dense(cfg.n)
    real_ok = (
        np.abs(x.values.imag).max(initial=0) < 1e-12
        and np.abs(dense.imag).max(initial=0) < 1e-12
    )
    out = {
        "err_linf": phase_error(x, dense, "linf"),
        "err_l2": phase_error(x, dense, "l2"),
        "err_l1": phase_error(x, dense, "l1_real") if real_ok else float("nan"),
    }
    t2 = tail_norm(x, cfg.k, 2)
    if cfg.scheme == "noiseless":
        out["success"] = out["err_l2"] <= 1e-9 * float(np.linalg.norm(x.values))
    elif cfg.scheme == "linf_l2":
        out["success"] = out["err_linf"] <= t2 / np.sqrt(cfg.k) + 1e-12
    elif cfg.scheme == "l2_l2":
        out["success"] = out["err_l2"] <= (1 + cfg.eps) * t2 + 1e-12
    else:
        out["success"] = out["err_l1"] <= (1 + cfg.eps) * tail_norm(x, cfg.k, 1) + 1e-12
    return out


def run_trial(cfg: ExperimentConfig, consts, t: int) -> dict:
    master = SeededStream(cfg.seed, "experiment")
    sig_seed = master.u64(0, t) & 0x7FFFFFFFFFFFFFFF
    x = generate(_signal_spec(cfg, sig_seed))
    ens = build_ensemble(cfg, master.derive("ensemble", t), consts)
    y = ens.measure(x.values.real if cfg.scheme == "l1_l1" else x.values)
    t0 = time.perf_counter()
    status = "ok"
    try:
        xhat, _diag = decode_ensemble(cfg, ens, y)
    except DecodeFailure as exc:
        xhat, status = None, f"decode_failure:{type(exc).__name__}"
    wall = time.perf_counter() - t0
    rec = {"trial": t, "m": ens.m, "status": status, "decode_s": wall}
    if xhat is None:
        rec.update({"success": False, "err_linf": float("nan"),
                    "err_l2": float("nan"), "err_l1": float("nan")})
    else:
        rec.update(evaluate_trial(cfg, x, xhat))
    return rec


CSV_COLUMNS = ["trial", "success", "err_linf", "err_l2", "err_l1", "m", "status"]


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run_experiment(cfg: ExperimentConfig, out_dir: str) -> dict:
    cfg.validate()
    consts = _constants(cfg)
    os.makedirs(out_dir, exist_ok=True)
    records = []
    if cfg.threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            records = list(pool.map(_trial_worker, [(cfg, t) for t in range(cfg.trials)]))
    else:
        for t in range(cfg.trials):
            records.append(run_trial(cfg, consts, t))

    with open(os.path.join(out_dir, "results.csv"), "w") as f:
        f.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            f.write(",".join(_fmt(rec[c]) for c in CSV_COLUMNS) + "\n")

    errs = [r["err_l2"] for r in records if np.isfinite(r["err_l2"])]
    summary = {
        "version": __version__,
        "config": {**asdict(cfg), "magnitude_range": list(cfg.magnitude_range)},
        "constants_c": consts.c,
        "constants_c0": consts.c0,
        "trials": cfg.trials,
        "success_rate": float(np.mean([r["success"] for r in records])),
        "m": records[0]["m"] if records else 0,
        "err_l2_quantiles": {
            q: (float(np.quantile(errs, float(q))) if errs else None)
            for q in ("0.5", "0.9", "0.99")
        },
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    timing = {
        "decode_s": [r["decode_s"] for r in records],
        "median_decode_s": float(np.median([r["decode_s"] for r in records])),
    }
    with open(os.path.join(out_dir, "timing.json"), "w") as f:
        json.dump(timing, f, indent=2)
        f.write("\n")
    return summary


def _trial_worker(args):
    cfg, t = args
    return run_trial(cfg, _constants(cfg), t)


def run_sweep(cfg: ExperimentConfig, out_dir: str) -> dict:
    if not cfg.sweep:
        raise ConfigError("sweep: empty parameter grid")
    (param, values), *rest = cfg.sweep.items()
    if rest:
        raise ConfigError("sweep: one axis at a time")
    if not values:
        raise ConfigError(f"sweep.{param}: empty grid")
    index = {"param": param, "values": list(values), "runs": []}
    for v in values:
        sub = ExperimentConfig(**{**asdict(cfg), param: v, "sweep": {}})
        sub_dir = os.path.join(out_dir, f"{param}={v}")
        summary = run_experiment(sub, sub_dir)
        index["runs"].append({
            "value": v, "dir": sub_dir,
            "success_rate": summary["success_rate"], "m": summary["m"],
        })
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "index.json"), "w") as f:
        json.dump(index, f, indent=2, sort_keys=True)
        f.write("\n")
    return index


# -- file-based single stages -------------------------------------------------


def stage_gen(cfg: ExperimentConfig, trial: int, out_path: str):
    master = SeededStream(cfg.seed, "experiment")
    sig_seed = master.u64(0, trial) & 0x7FFFFFFFFFFFFFFF
    x = generate(_signal_spec(cfg, sig_seed))
    if out_path.endswith(".json"):
        with open(out_path, "w") as f:
            f.write(x.to_json())
    else:
        with open(out_path, "wb") as f:
            f.write(x.to_binary())


def _load_signal(path: str) -> ComplexSignal:
    if path.endswith(".json"):
        with open(path) as f:
            return ComplexSignal.from_json(f.read())
    with open(path, "rb") as f:
        return ComplexSignal.from_binary(f.read())


def stage_measure(cfg: ExperimentConfig, trial: int, signal_path: str, out_path: str):
    consts = _constants(cfg)
    master = SeededStream(cfg.seed, "experiment")
    x = _load_signal(signal_path)
    ens = build_ensemble(cfg, master.derive("ensemble", trial), consts)
    lazy = cfg.scheme in ("linf_l2", "l2_l2")
    y = ens.measure(x.values.real if cfg.scheme == "l1_l1" else x.values,
                    **({"lazy": False} if lazy else {}))
    payload = {
        "ensemble": ens.to_config(),
        "blocks": {name: np.asarray(a).tolist() for name, a in y.blocks.items()},
    }
    with open(out_path, "w") as f:
        json.dump(payload, f)
        f.write("\n")


def stage_decode(cfg: ExperimentConfig, trial: int, meas_path: str, out_path: str):
    from .measurements import PhaselessMeasurements

    consts = _constants(cfg)
    master = SeededStream(cfg.seed, "experiment")
    ens = build_ensemble(cfg, master.derive("ensemble", trial), consts)
    with open(meas_path) as f:
        payload = json.load(f)
    y = PhaselessMeasurements(
        {name: np.asarray(b, dtype=np.float64) for name, b in payload["blocks"].items()}
    )
    xhat, _diag = decode_ensemble(cfg, ens, y)
    out = {
        "n": cfg.n,
        "support": xhat.support.tolist(),
        "values": [[v.real, v.imag] for v in xhat.values.tolist()],
    }
    with open(out_path, "w") as f:
        json.dump(out, f)
        f.write("\n")


def stage_eval(cfg: ExperimentConfig, signal_path: str, xhat_path: str, out_path: str | None):
    from .signals import SparseApprox

    x = _load_signal(signal_path)
    with open(xhat_path) as f:
        obj = json.load(f)
    xhat = SparseApprox(np.asarray(obj["support"], dtype=np.int64),
                        np.asarray([complex(a, b) for a, b in obj["values"]]))
    result = evaluate_trial(cfg, x, xhat)
    if out_path:
        with open(out_path, "w") as f:
            json.dump({k: (bool(v) if k == "success" else v) for k, v in result.items()}, f)
            f.write("\n")
    return result


# -- argument parsing -----------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--seed", type=int, help="override config seed")
    p.add_argument("--trials", type=int, help="override trial count")
    p.add_argument("--threads", type=int, help="worker processes")
    p.add_argument("--strict-paper-constants", action="store_true")
    p.add_argument("--constants", help="constants-file override (JSON)")


def _load_cfg(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config)
    for name in ("seed", "trials", "threads"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if getattr(args, "constants", None):
        cfg.constants_path = args.constants
    if getattr(args, "strict_paper_constants", False):
        cfg.strict_paper_constants = True
    return cfg.validate()


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="phaseless",
                                 description="phaseless sparse recovery benchmarks")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run a full experiment")
    _add_common(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="cartesian sweep over one parameter")
    _add_common(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("gen", help="generate one trial signal")
    _add_common(p)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("measure", help="measure a signal file")
    _add_common(p)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--signal", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("decode", help="decode a measurement file")
    _add_common(p)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--measurements", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate a recovery against the truth")
    _add_common(p)
    p.add_argument("--signal", required=True)
    p.add_argument("--xhat", required=True)
    p.add_argument("--out")

    p = sub.add_parser("calibrate", help="re-derive calibrated constants")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)

    args = ap.parse_args(argv)
    try:
        if args.cmd == "calibrate":
            from .calibration import calibrate_phase_constants

            consts, report = calibrate_phase_constants(DEFAULT, seed=args.seed)
            save_constants(consts, args.out)
            print(json.dumps(report["history"][-1], indent=2))
            return 0
        cfg = _load_cfg(args)
        if args.cmd == "run":
            summary = run_experiment(cfg, args.out)
            print(json.dumps({"success_rate": summary["success_rate"], "m": summary["m"]}))
        elif args.cmd == "sweep":
            index = run_sweep(cfg, args.out)
            print(json.dumps(index["runs"]))
        elif args.cmd == "gen":
            stage_gen(cfg, args.trial, args.out)
        elif args.cmd == "measure":
            stage_measure(cfg, args.trial, args.signal, args.out)
        elif args.cmd == "decode":
            stage_decode(cfg, args.trial, args.measurements, args.out)
        elif args.cmd == "eval":
            result = stage_eval(cfg, args.signal, args.xhat, args.out)
            print(json.dumps({k: bool(v) if k == "success" else v for k, v in result.items()}))
            if not result["success"]:
                return 3
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
