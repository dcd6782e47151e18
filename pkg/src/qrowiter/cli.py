"""Benchmark harness: convergence experiments, verification, step-count caps.

converge reproduces the convergence figures: for each requested mode and
batch size it runs independent trials on one Gaussian (or user-supplied)
system and writes per-trial and aggregated mean-squared-error CSVs.
Schedules are keyed by (seed, trial, q), so classical and quantum runs of
the same trial see identical row draws and their rows can be compared
pairwise.

verify runs the property suites and exits nonzero on any failure.

kmax reports the scaled condition number, the predicted step cap
kappa_s^2 ln(1/eps) for the one-row method, and the empirically observed
step count on a consistent system.
"""
from __future__ import annotations

import argparse
import json
import os
import sys as _sys
from dataclasses import dataclass, field
from math import ceil, log

import numpy as np

from .classical import IterationSchedule, SamplingWeights, draw_schedule, run_classical
from .driver import run_quantum
from .linalg import (
    LinearSystem,
    SolutionBundle,
    frobenius_and_kappa,
    gen_gaussian_system,
    least_squares_solve,
    load_matrix,
    load_vector,
    normalize_rows,
)
from .rng import stream
from .verify import run_all

MODES = ("classical-one", "classical-multi", "quantum-matrix", "quantum-gate")
TRAJECTORY_HEADER = "mode,q,alpha,trial,step,err_sq,success_prob"
AGGREGATED_HEADER = "mode,q,alpha,step,mean_err_sq"
_X1_PURPOSE = 99
_SCHED_PURPOSE = 50


@dataclass
class ExperimentConfig:
    m: int = 100
    n: int = 4
    trials: int = 100
    steps: int = 200
    q_list: tuple[int, ...] = (1, 5, 10)
    alpha_list: tuple[float, ...] = (1.0,)
    modes: tuple[str, ...] = ("quantum-matrix",)
    seed: int = 7
    out: str = "out"
    matrix_path: str | None = None
    rhs_path: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise ValueError(f"unknown mode(s) {bad}; choose from {MODES}")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def load_experiment_system(cfg: ExperimentConfig) -> tuple[LinearSystem, SolutionBundle]:
    """Either the seeded Gaussian instance or a user-supplied system
    (normalized, with the least-squares pair computed by the oracle)."""
    if cfg.matrix_path:
        if not cfg.rhs_path:
            raise ValueError("--matrix requires --rhs")
        sys_ = normalize_rows(LinearSystem(a=load_matrix(cfg.matrix_path), b=load_vector(cfg.rhs_path)))
        x_star = least_squares_solve(sys_)
        return sys_, SolutionBundle(x_star=x_star, r_star=sys_.b - sys_.a @ x_star)
    return gen_gaussian_system(cfg.m, cfg.n, seed=cfg.seed)


def _runs_for(cfg: ExperimentConfig):
    for mode in cfg.modes:
        qs = (1,) if mode == "classical-one" else cfg.q_list
        for q in qs:
            for alpha in cfg.alpha_list:
                yield mode, q, alpha


def converge_experiment(cfg: ExperimentConfig) -> tuple[str, str]:
    """Run the experiment grid and write the two CSVs; returns their paths."""
    sys_, bundle = load_experiment_system(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    traj_path = os.path.join(cfg.out, "trajectories.csv")
    agg_path = os.path.join(cfg.out, "aggregated.csv")

    x1s = []
    for t in range(cfg.trials):
        x1 = stream(cfg.seed, t, _X1_PURPOSE).standard_normal(sys_.n)
        x1s.append(x1 / np.linalg.norm(x1))
    schedules: dict[int, list[IterationSchedule]] = {}

    traj_lines = [TRAJECTORY_HEADER]
    agg_lines = [AGGREGATED_HEADER]
    for mode, q, alpha in _runs_for(cfg):
        quantum = mode.startswith("quantum")
        if quantum and alpha > 1.0:
            raise ValueError(f"alpha={alpha} > 1 is classical-only; the weight normalization forbids it")
        weights = SamplingWeights.uniform(sys_.m, q=q, alpha=alpha, quantum=quantum)
        if q not in schedules:
            schedules[q] = [
                draw_schedule(SamplingWeights.uniform(sys_.m, q=q), cfg.steps, stream(cfg.seed, t, _SCHED_PURPOSE + q))
                for t in range(cfg.trials)
            ]
        err_sum = np.zeros(cfg.steps + 1)
        for trial in range(cfg.trials):
            sched = schedules[q][trial]
            if mode.startswith("classical"):
                traj = run_classical(sys_, weights, sched, x1s[trial], cfg.steps, x_star=bundle.x_star)
                errs = [e for _, e in traj]
                probs = [""] * (cfg.steps + 1)
            else:
                backend = "matrix" if mode == "quantum-matrix" else "gate"
                res = run_quantum(sys_, weights, sched, x1s[trial], cfg.steps, backend=backend, x_star=bundle.x_star)
                errs = res.errors()
                probs = [_fmt(r.success_prob) for r in res.records]
            err_sum += np.array(errs)
            for step, (e, p) in enumerate(zip(errs, probs)):
                traj_lines.append(f"{mode},{q},{_fmt(alpha)},{trial},{step},{_fmt(e)},{p}")
        mean = err_sum / cfg.trials
        for step, e in enumerate(mean):
            agg_lines.append(f"{mode},{q},{_fmt(alpha)},{step},{_fmt(e)}")

    with open(traj_path, "w") as fh:
        fh.write("\n".join(traj_lines) + "\n")
    with open(agg_path, "w") as fh:
        fh.write("\n".join(agg_lines) + "\n")
    return traj_path, agg_path


@dataclass
class KmaxReport:
    kappa_s: float
    k_max: float
    k_emp: int | None
    slack: float
    passed: bool

    def lines(self) -> list[str]:
        out = [
            f"kappa_s = {self.kappa_s:.6g}",
            f"K_max = kappa_s^2 * ln(1/eps) = {self.k_max:.6g}",
        ]
        if self.k_emp is not None:
            out.append(f"K_emp = {self.k_emp} (first step with mean err_sq <= eps^2)")
            out.append(f"K_emp <= {self.slack:g} * K_max: {'yes' if self.passed else 'NO'}")
        return out


def kmax_report(
    sys_: LinearSystem,
    bundle: SolutionBundle,
    epsilon: float,
    slack: float = 5.0,
    trials: int = 100,
    seed: int = 0,
) -> KmaxReport:
    """Predicted versus empirical step counts for the one-row method."""
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must be in (0, 1]")
    _, kappa = frobenius_and_kappa(sys_)
    if kappa is None:
        raise ValueError("kappa_s undefined: matrix is singular or non-square")
    k_max = kappa**2 * log(1.0 / epsilon)
    if trials < 1 or k_max <= 0:
        return KmaxReport(kappa_s=kappa, k_max=k_max, k_emp=None, slack=slack, passed=True)
    steps = max(int(ceil(slack * k_max)) + 20, 40)
    w = SamplingWeights.uniform(sys_.m, q=1, alpha=1.0)
    err_sum = np.zeros(steps + 1)
    for t in range(trials):
        sched = draw_schedule(w, steps, stream(seed, t, 3))
        x1 = stream(seed, t, 4).standard_normal(sys_.n)
        x1 /= np.linalg.norm(x1)
        traj = run_classical(sys_, w, sched, x1, steps, x_star=bundle.x_star)
        err_sum += np.array([e for _, e in traj])
    mean = err_sum / trials
    below = np.nonzero(mean <= epsilon**2)[0]
    k_emp = int(below[0]) if below.size else steps + 1
    return KmaxReport(kappa_s=kappa, k_max=k_max, k_emp=k_emp, slack=slack, passed=k_emp <= slack * k_max)


def _parse_config_file(path: str) -> dict[str, str]:
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line without '=': {line!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t)


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t)


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrowiter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    conv = sub.add_parser("converge", help="run convergence trials and write CSVs")
    conv.add_argument("--config", help="key=value file; command-line flags override it")
    conv.add_argument("--m", type=int, default=100)
    conv.add_argument("--n", type=int, default=4)
    conv.add_argument("--trials", type=int, default=100)
    conv.add_argument("--steps", type=int, default=200)
    conv.add_argument("--q", type=_int_list, default=(1, 5, 10))
    conv.add_argument("--alpha", type=_float_list, default=(1.0,))
    conv.add_argument("--mode", type=_str_list, default=("quantum-matrix",))
    conv.add_argument("--seed", type=int, default=7)
    conv.add_argument("--matrix", dest="matrix_path")
    conv.add_argument("--rhs", dest="rhs_path")
    conv.add_argument("--out", default="out")

    ver = sub.add_parser("verify", help="run the property suites")
    ver.add_argument("--full", action="store_true", help="include the slow figure reproduction")
    ver.add_argument("--samples", type=int, default=100_000, help="Monte-Carlo samples for the moment checks")
    ver.add_argument("--json", dest="json_path", help="write the machine-readable summary here")
    ver.add_argument(
        "--inject-g-sign-error",
        action="store_true",
        help="negative test: drop the select-side phase layer and expect the block suite to fail",
    )

    km = sub.add_parser("kmax", help="predicted vs empirical step cap")
    km.add_argument("--m", type=int, default=4, help="size of the square test system")
    km.add_argument("--seed", type=int, default=0)
    km.add_argument("--epsilon", type=float, default=0.01)
    km.add_argument("--slack", type=float, default=5.0)
    km.add_argument("--trials", type=int, default=100)
    km.add_argument("--matrix", dest="matrix_path")
    km.add_argument("--rhs", dest="rhs_path")
    return parser


def _apply_config_file(argv: list[str], parser: argparse.ArgumentParser) -> argparse.Namespace:
    # pre-scan for --config so file values become defaults the flags override
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        file_values = _parse_config_file(args.config)
        converters = {
            "m": int,
            "n": int,
            "trials": int,
            "steps": int,
            "seed": int,
            "q": _int_list,
            "alpha": _float_list,
            "mode": _str_list,
            "out": str,
            "matrix": str,
            "rhs": str,
        }
        explicit = {a.lstrip("-").split("=")[0] for a in argv if a.startswith("--")}
        for key, raw in file_values.items():
            if key not in converters:
                raise ValueError(f"unknown config key {key!r}")
            if key in explicit:
                continue
            dest = {"matrix": "matrix_path", "rhs": "rhs_path"}.get(key, key)
            setattr(args, dest, converters[key](raw))
    return args


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(_sys.argv[1:]) if argv is None else list(argv)
    try:
        args = _apply_config_file(argv, parser)
    except ValueError as exc:
        parser.exit(2, f"error: {exc}\n")

    if args.command == "converge":
        try:
            cfg = ExperimentConfig(
                m=args.m,
                n=args.n,
                trials=args.trials,
                steps=args.steps,
                q_list=tuple(args.q),
                alpha_list=tuple(args.alpha),
                modes=tuple(args.mode),
                seed=args.seed,
                out=args.out,
                matrix_path=args.matrix_path,
                rhs_path=args.rhs_path,
            )
        except ValueError as exc:
            parser.exit(2, f"error: {exc}\n")
        try:
            traj, agg = converge_experiment(cfg)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=_sys.stderr)
            return 2 if isinstance(exc, ValueError) else 1
        print(f"wrote {traj}")
        print(f"wrote {agg}")
        return 0

    if args.command == "verify":
        results = run_all(include_slow=args.full, inject_g_sign_error=args.inject_g_sign_error, mc_samples=args.samples)
        for res in results:
            print(res.line())
        summary = {
            "passed": all(r.passed for r in results),
            "checks": [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results],
        }
        text = json.dumps(summary, indent=2)
        if args.json_path:
            with open(args.json_path, "w") as fh:
                fh.write(text + "\n")
        else:
            print(text)
        return 0 if summary["passed"] else 1

    if args.command == "kmax":
        try:
            if args.matrix_path:
                sys_ = normalize_rows(LinearSystem(a=load_matrix(args.matrix_path), b=load_vector(args.rhs_path)))
                x_star = least_squares_solve(sys_)
                bundle = SolutionBundle(x_star=x_star, r_star=sys_.b - sys_.a @ x_star)
            else:
                sys_, bundle = gen_gaussian_system(args.m, args.m, seed=args.seed)
            report = kmax_report(sys_, bundle, epsilon=args.epsilon, slack=args.slack, trials=args.trials, seed=args.seed)
        except ValueError as exc:
            print(f"error: {exc}", file=_sys.stderr)
            return 1
        for line in report.lines():
            print(line)
        return 0 if report.passed else 1

    return 2


if __name__ == "__main__":
    raise SystemExit(main())
