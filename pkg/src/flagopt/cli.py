"""Command-line driver: integrals in, optimized orbitals and a convergence trace out.

Exit status is 0 on convergence, 1 when the iteration budget runs out and 2
on any input or configuration error.
"""

import argparse
import csv
import logging
import os
import sys
import time
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .estimator import PRECONDITIONERS, check_partition, orthonormalize_guess
from .exceptions import ShapeError
from .geometry import random_point
from .integrals import read_fcidump
from .optimizers import BETA_VARIANTS, METHODS, RESTARTS, MethodConfig, solve
from .rohf import ROHFObjective, core_guess

EXIT_CONVERGED = 0
EXIT_NOT_CONVERGED = 1
EXIT_INPUT_ERROR = 2

TRACE_HEADER = ("index", "energy", "grad_norm", "step", "restart", "beta")

logger = logging.getLogger("flagopt")


@dataclass(frozen=True)
class RunConfig:
    fcidump_path: str
    n_internal: Optional[int] = None
    n_active: Optional[int] = None
    method: str = "RCG"
    beta_variant: str = "PR"
    memory: int = 8
    restart: str = "dynamic"
    preconditioner: str = "none"
    tolerance: float = 1e-5
    max_iterations: int = 1000
    guess: str = "core"
    guess_path: Optional[str] = None
    seed: Optional[int] = None
    trace_path: Optional[str] = None
    output: str = "text"

    def method_config(self):
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"preconditioner must be one of {PRECONDITIONERS}")
        return MethodConfig(
            method=self.method,
            beta_variant=self.beta_variant,
            memory=self.memory,
            restart=self.restart,
            use_preconditioner=self.preconditioner == "sylvester",
            tolerance=self.tolerance,
            max_iterations=self.max_iterations,
        )


class InputError(Exception):
    """Any problem with the inputs that should end the run with status 2."""


def _fmt(x):
    return format(x, ".17g")


def write_trace(stream, trace):
    """Comma-separated trace with a header row; reals carry 17 significant digits."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for rec in trace:
        writer.writerow([
            rec.index,
            _fmt(rec.energy),
            _fmt(rec.grad_norm),
            _fmt(rec.step),
            int(rec.restart),
            "" if rec.beta is None else _fmt(rec.beta),
        ])


def read_trace(path):
    """Parse a trace file back into a list of dicts (``beta`` is ``None`` when blank)."""
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    out = []
    for row in rows:
        out.append({
            "index": int(row["index"]),
            "energy": float(row["energy"]),
            "grad_norm": float(row["grad_norm"]),
            "step": float(row["step"]),
            "restart": bool(int(row["restart"])),
            "beta": float(row["beta"]) if row["beta"] else None,
        })
    return out


def load_guess_matrix(path, shape):
    try:
        C = np.loadtxt(path, ndmin=2)
    except (OSError, ValueError) as exc:
        raise InputError(f"{path}: cannot read guess matrix: {exc}") from None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        point, _ = orthonormalize_guess(C, shape)
    for w in caught:
        logger.warning("%s: %s", path, w.message)
    return point


def _initial_point(cfg, ints, shape):
    if cfg.guess == "core":
        return core_guess(ints, shape)
    if cfg.guess == "random":
        return random_point(shape, cfg.seed)
    if cfg.guess == "file":
        if not cfg.guess_path:
            raise InputError("--guess file requires --guess-file")
        return load_guess_matrix(cfg.guess_path, shape)
    raise InputError(f"unknown guess {cfg.guess!r}")


def _load(cfg):
    path = cfg.fcidump_path
    if not os.path.isfile(path):
        raise InputError(f"{path}: no such file")
    try:
        ints = read_fcidump(path)
    except (OSError, ValueError) as exc:
        # FCIDumpError messages already start with the line number
        raise InputError(f"{path}: {exc}") from None
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            shape = check_partition(ints, cfg.n_internal, cfg.n_active)
    except ShapeError as exc:
        raise InputError(f"{path}: {exc}") from None
    for w in caught:
        logger.warning("%s: %s", path, w.message)
    return ints, shape


def run(cfg, stdout=None):
    """Parse, build the guess, solve and report.

    Returns the exit status and the :class:`OptimResult` (``None`` on input
    errors, which are reported on standard error).
    """
    stdout = stdout or sys.stdout
    try:
        method_config = cfg.method_config()
        ints, shape = _load(cfg)
        C0 = _initial_point(cfg, ints, shape)
    except (InputError, ValueError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR, None

    start = time.perf_counter()
    result = solve(ROHFObjective(ints, shape), C0, method_config)
    wall = time.perf_counter() - start

    if cfg.trace_path:
        with open(cfg.trace_path, "w", newline="") as f:
            write_trace(f, result.trace)

    summary = {
        "converged": result.converged,
        "energy": f"{result.energy:.12f}",
        "iterations": result.n_iter,
        "grad_norm": f"{result.grad_norm:.3e}",
        "wall_time": f"{wall:.3f}",
        "method": cfg.method,
        "n_internal": shape.n_internal,
        "n_active": shape.n_active,
        "message": result.message,
    }
    if cfg.output == "structured":
        for key, value in summary.items():
            print(f"{key}={str(value).lower() if isinstance(value, bool) else value}", file=stdout)
    else:
        status = "converged" if result.converged else "NOT converged"
        print(f"{cfg.method} {status} after {result.n_iter} iterations", file=stdout)
        print(f"  energy     {summary['energy']} Eh", file=stdout)
        print(f"  |gradient| {summary['grad_norm']}", file=stdout)
        print(f"  wall time  {summary['wall_time']} s", file=stdout)
    return (EXIT_CONVERGED if result.converged else EXIT_NOT_CONVERGED), result


def build_parser():
    p = argparse.ArgumentParser(
        prog="flagopt",
        description="High-spin ROHF by Riemannian optimization on the flag manifold.",
    )
    p.add_argument("fcidump", help="integral file in FCIDUMP format")
    p.add_argument("--n-internal", type=int, help="doubly occupied orbitals (default from header)")
    p.add_argument("--n-active", type=int, help="singly occupied orbitals (default from header)")
    p.add_argument("--method", choices=METHODS, default="RCG")
    p.add_argument("--beta", dest="beta_variant", choices=BETA_VARIANTS, default="PR")
    p.add_argument("--memory", type=int, default=8)
    p.add_argument("--restart", choices=RESTARTS, default="dynamic")
    p.add_argument("--preconditioner", choices=PRECONDITIONERS, default="none")
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--max-iterations", type=int, default=1000)
    p.add_argument("--guess", choices=("core", "random", "file"), default="core")
    p.add_argument("--guess-file", dest="guess_path", help="whitespace-separated N x N matrix")
    p.add_argument("--seed", type=int)
    p.add_argument("--trace", dest="trace_path", help="write the per-iteration trace here")
    p.add_argument("--output", choices=("text", "structured"), default="text")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    cfg = RunConfig(
        fcidump_path=args.fcidump,
        n_internal=args.n_internal,
        n_active=args.n_active,
        method=args.method,
        beta_variant=args.beta_variant,
        memory=args.memory,
        restart=args.restart,
        preconditioner=args.preconditioner,
        tolerance=args.tolerance,
        max_iterations=args.max_iterations,
        guess=args.guess,
        guess_path=args.guess_path,
        seed=args.seed,
        trace_path=args.trace_path,
        output=args.output,
    )
    status, _ = run(cfg)
    return status


if __name__ == "__main__":
    sys.exit(main())
