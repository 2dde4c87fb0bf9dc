"""Riemannian steepest descent, conjugate gradient and L-BFGS on the flag manifold.

The solvers only need an objective with ``energy(point)`` and
``gradient(point)``; ``precondition(point, g)`` and ``preconditioner(point)``
are used when preconditioning is switched on. Every tangent quantity kept
between iterations is moved to the current tangent space with the parallel
transport of :mod:`flagopt.geometry`.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional

import numpy as np

from .exceptions import LineSearchError, NotDescentDirectionError
from .geometry import FlagPoint, metric, retract, transport_blocks

logger = logging.getLogger(__name__)

METHODS = ("RSD", "RCG", "RLBFGS")
BETA_VARIANTS = ("FR", "PR", "HS")
RESTARTS = ("dynamic", "fixed")

CURVATURE_GUARD = 1e-12
#: largest metric length of the first trial step of a line search
MAX_TRIAL_STEP = 2.0


@dataclass(frozen=True)
class MethodConfig:
    """Solver settings.

    ``beta_variant`` is read by RCG only; ``memory``, ``restart`` and
    ``fixed_restart_threshold`` by R-LBFGS only.
    """

    method: str = "RCG"
    beta_variant: str = "PR"
    memory: int = 8
    restart: str = "dynamic"
    fixed_restart_threshold: float = 0.5
    use_preconditioner: bool = False
    tolerance: float = 1e-5
    max_iterations: int = 1000
    c1: float = 1e-4
    c2: float = 0.9
    max_evaluations: int = 40

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.beta_variant not in BETA_VARIANTS:
            raise ValueError(f"beta_variant must be one of {BETA_VARIANTS}, got {self.beta_variant!r}")
        if self.restart not in RESTARTS:
            raise ValueError(f"restart must be one of {RESTARTS}, got {self.restart!r}")
        if self.memory < 0:
            raise ValueError("memory must be non-negative")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("line search constants must satisfy 0 < c1 < c2 < 1")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be positive")


@dataclass(frozen=True)
class IterationRecord:
    index: int
    energy: float
    grad_norm: float
    step: float
    restart: bool
    beta: Optional[float] = None


@dataclass
class OptimResult:
    point: FlagPoint
    energy: float
    grad_norm: float
    converged: bool
    n_iter: int
    trace: List[IterationRecord] = field(default_factory=list)
    message: str = ""


class LineSearchResult(NamedTuple):
    step: float
    point: FlagPoint
    energy: float
    gradient: object
    n_evaluations: int


def check_convergence(g, tol):
    """True when the metric norm of ``g`` is at most ``tol``."""
    return math.sqrt(max(metric(g, g), 0.0)) <= tol


def grad_norm(g):
    return math.sqrt(max(metric(g, g), 0.0))


def _cubic_min(a, fa, da, b, fb, db):
    """Minimiser of the cubic interpolating two points and slopes, or None."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    t = b - (b - a) * (db + d2 - d1) / denom
    return t if np.isfinite(t) else None


def line_search(obj, point, d, t0, gradient=None, energy0=None, c1=1e-4, c2=0.9,
                max_evaluations=40):
    """Strong Wolfe line search along the geodesic ``t -> retract(point, t d)``.

    The slope at ``t`` is ``metric(grad(x_t), T_{t d}(d))``. Bracketing
    doubles the step until the minimiser is enclosed, then a safeguarded
    cubic zoom narrows the bracket.

    Returns
    -------
    LineSearchResult
        Accepted step, new point, its energy and gradient.

    Raises
    ------
    NotDescentDirectionError
        If ``metric(gradient, d) >= 0``.
    LineSearchError
        If no Wolfe step is found within ``max_evaluations`` energy evaluations.
    """
    g0 = obj.gradient(point) if gradient is None else gradient
    e0 = obj.energy(point) if energy0 is None else energy0
    slope0 = metric(g0, d)
    if not slope0 < 0:
        raise NotDescentDirectionError(f"metric(gradient, d) = {slope0:.3e} is not negative")
    if not t0 > 0:
        raise ValueError("initial step must be positive")

    n_eval = 0

    def evaluate(t):
        nonlocal n_eval
        n_eval += 1
        x = retract(point, t * d)
        e = obj.energy(x)
        g = obj.gradient(x)
        return e, metric(g, transport_blocks(t * d, d)), x, g

    def sufficient(t, e):
        return e <= e0 + c1 * t * slope0 and e < e0

    def curvature(slope):
        return abs(slope) <= -c2 * slope0

    def zoom(lo, hi):
        # lo/hi are (t, energy, slope); lo satisfies sufficient decrease
        while n_eval < max_evaluations:
            width = hi[0] - lo[0]
            t = _cubic_min(lo[0], lo[1], lo[2], hi[0], hi[1], hi[2])
            low, high = sorted((lo[0] + 0.1 * width, hi[0] - 0.1 * width))
            if t is None or not low <= t <= high:
                t = lo[0] + 0.5 * width
            e, s, x, g = evaluate(t)
            if not sufficient(t, e) or e >= lo[1]:
                hi = (t, e, s)
            else:
                if curvature(s):
                    return LineSearchResult(t, x, e, g, n_eval)
                if s * width >= 0:
                    hi = lo
                lo = (t, e, s)
        raise LineSearchError(f"zoom did not find a Wolfe step in {max_evaluations} evaluations")

    prev = (0.0, e0, slope0)
    t = t0
    while n_eval < max_evaluations:
        e, s, x, g = evaluate(t)
        if not np.isfinite(e):
            return zoom(prev, (t, math.inf, math.inf))
        if not sufficient(t, e) or (n_eval > 1 and e >= prev[1]):
            return zoom(prev, (t, e, s))
        if curvature(s):
            return LineSearchResult(t, x, e, g, n_eval)
        if s >= 0:
            return zoom((t, e, s), prev)
        prev = (t, e, s)
        t *= 2.0
    raise LineSearchError(f"bracketing did not find a Wolfe step in {max_evaluations} evaluations")


class _Stepper:
    """Shared bookkeeping: line search with the retry policy and the trace."""

    def __init__(self, obj, config, callback):
        self.obj = obj
        self.config = config
        self.callback = callback
        self.trace = []

    def record(self, index, e, g, step, restart, beta, point):
        rec = IterationRecord(index, e, grad_norm(g), step, restart, beta)
        self.trace.append(rec)
        if self.callback is not None:
            self.callback(rec, point)
        return rec

    def search(self, point, d, t0, g, e):
        """Line search; on failure retry once along ``-g`` with half the step.

        The first trial step is capped at ``MAX_TRIAL_STEP`` in metric length;
        a shifted preconditioner can produce very long directions far from a
        minimum, and rotations beyond a few radians only wrap around.
        """
        cfg = self.config
        t0 = min(t0, MAX_TRIAL_STEP / grad_norm(d))
        try:
            return line_search(self.obj, point, d, t0, g, e, cfg.c1, cfg.c2,
                               cfg.max_evaluations), False
        except LineSearchError as exc:
            logger.warning("line search failed (%s); retrying along -gradient", exc)
        t0 = min(0.5 * t0, MAX_TRIAL_STEP / grad_norm(g))
        return line_search(self.obj, point, -g, t0, g, e, cfg.c1, cfg.c2,
                           cfg.max_evaluations), True


def _initial_step(g, prev_step, prev_slope, slope):
    if prev_step is None:
        return 1.0 / (1.0 + grad_norm(g))
    return prev_step * prev_slope / slope


def _precond_fn(obj, config):
    if config.use_preconditioner:
        return obj.precondition
    return lambda point, g: g


def _finish(point, e, g, converged, stepper, n_iter, message):
    return OptimResult(point, e, grad_norm(g), converged, n_iter, stepper.trace, message)


def solve_rsd(obj, C0, config=None, callback=None):
    """Riemannian steepest descent with a Wolfe line search."""
    return _cg(obj, C0, replace(config or MethodConfig(), method="RSD"), callback, None)


def _beta(variant, g, z, g_prev_t, z_prev_dot_g_prev, d_prev_t, g_prev_dot_d_prev):
    if variant == "FR":
        return metric(g, z) / z_prev_dot_g_prev
    y = g - g_prev_t
    if variant == "PR":
        return metric(z, y) / z_prev_dot_g_prev
    denom = metric(g, d_prev_t) - g_prev_dot_d_prev
    return metric(z, y) / denom if denom != 0 else 0.0


def solve_rcg(obj, C0, config=None, callback=None):
    """Riemannian nonlinear conjugate gradient.

    ``d_k = -z_k + beta_k T(d_{k-1})`` where ``z`` is the (optionally
    preconditioned) gradient. The previous direction moves along itself, so
    its transport is trivial; the previous gradient is transported with the
    full series. ``beta`` is clipped at zero and dropped whenever the
    combined direction is not a descent direction.
    """
    config = replace(config or MethodConfig(), method="RCG")
    return _cg(obj, C0, config, callback,
               lambda *args: _beta(config.beta_variant, *args))


def _cg(obj, C0, config, callback, beta_fn):
    # beta_fn=None gives steepest descent (no history, no beta in the trace)
    precond = _precond_fn(obj, config)
    stepper = _Stepper(obj, config, callback)

    x = C0
    e, g = obj.energy(x), obj.gradient(x)
    stepper.record(0, e, g, 0.0, False, None, x)
    history = None
    prev_step = prev_slope = None
    for it in range(1, config.max_iterations + 1):
        if check_convergence(g, config.tolerance):
            return _finish(x, e, g, True, stepper, it - 1, "converged")
        z = precond(x, g)
        d = -z
        beta = None
        restart = False
        if beta_fn is not None and history is not None:
            d_prev_t, g_prev_t, zg_prev, gd_prev = history
            beta = beta_fn(g, z, g_prev_t, zg_prev, d_prev_t, gd_prev)
            if not np.isfinite(beta) or beta < 0:
                beta, restart = 0.0, True
            candidate = d + beta * d_prev_t
            if beta and metric(g, candidate) < 0:
                d = candidate
            elif beta:
                beta, restart = 0.0, True
        slope = metric(g, d)
        t0 = _initial_step(g, prev_step, prev_slope, slope)
        try:
            ls, retried = stepper.search(x, d, t0, g, e)
        except LineSearchError as exc:
            return _finish(x, e, g, False, stepper, it - 1, f"line search failed: {exc}")
        if retried:
            d, slope, beta, restart = -g, -metric(g, g), None, True
        step = ls.step * d
        history = (
            transport_blocks(step, d),
            transport_blocks(step, g),
            metric(z, g),
            metric(g, d),
        )
        prev_step, prev_slope = ls.step, slope
        x, e, g = ls.point, ls.energy, ls.gradient
        stepper.record(it, e, g, ls.step, restart, beta, x)
    converged = check_convergence(g, config.tolerance)
    return _finish(x, e, g, converged, stepper, config.max_iterations,
                   "converged" if converged else "maximum iterations reached")


def solve_rlbfgs(obj, C0, config=None, callback=None):
    """Riemannian L-BFGS with parallel-transported history."""
    return _rlbfgs(obj, C0, config or MethodConfig(method="RLBFGS"), callback,
                   transport_blocks)


def _two_loop(g, pairs, initial):
    q = g
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * metric(s, q)
        alphas.append(a)
        q = q - a * y
    r = initial(q)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * metric(y, r)
        r = r + (a - b) * s
    return r


def _rlbfgs(obj, C0, config, callback, transport):
    config = replace(config, method="RLBFGS")
    stepper = _Stepper(obj, config, callback)
    use_p = config.use_preconditioner
    fixed = config.restart == "fixed"

    x = C0
    e, g = obj.energy(x), obj.gradient(x)
    stepper.record(0, e, g, 0.0, False, None, x)
    pairs = []
    P = obj.preconditioner(x) if use_p else None
    prev_step = prev_slope = None

    for it in range(1, config.max_iterations + 1):
        if check_convergence(g, config.tolerance):
            return _finish(x, e, g, True, stepper, it - 1, "converged")
        restart = False
        if use_p:
            current = obj.preconditioner(x)
            if not fixed:
                P = current
            else:
                dev = np.linalg.norm(current.diagonal - P.diagonal)
                if dev > config.fixed_restart_threshold * np.linalg.norm(P.diagonal):
                    P, pairs, restart = current, [], True

        def initial(q):
            if not pairs:
                return P(q) if use_p else q
            s, y, _ = pairs[-1]
            if use_p:
                Py = P(y)
                return (metric(s, y) / metric(y, Py)) * P(q)
            return (metric(s, y) / metric(y, y)) * q

        d = -_two_loop(g, pairs, initial)
        if pairs and not metric(g, d) < 0:
            pairs, restart = [], True
            d = -initial(g)
        slope = metric(g, d)
        t0 = 1.0 if pairs else _initial_step(g, prev_step, prev_slope, slope)
        try:
            ls, retried = stepper.search(x, d, t0, g, e)
        except LineSearchError as exc:
            return _finish(x, e, g, False, stepper, it - 1, f"line search failed: {exc}")
        if retried:
            d, slope, restart = -g, -metric(g, g), True
            pairs = []
        step = ls.step * d
        g_new = ls.gradient
        s_new = transport(step, step)
        y_new = g_new - transport(step, g)
        pairs = [(transport(step, s), transport(step, y), rho) for s, y, rho in pairs]
        if config.memory > 0:
            sy = metric(s_new, y_new)
            if sy > CURVATURE_GUARD * math.sqrt(metric(s_new, s_new) * metric(y_new, y_new)):
                pairs.append((s_new, y_new, 1.0 / sy))
                pairs = pairs[-config.memory:]
        prev_step, prev_slope = ls.step, slope
        x, e, g = ls.point, ls.energy, g_new
        stepper.record(it, e, g, ls.step, restart, None, x)
    converged = check_convergence(g, config.tolerance)
    return _finish(x, e, g, converged, stepper, config.max_iterations,
                   "converged" if converged else "maximum iterations reached")


def solve(obj, C0, config=None, callback=None):
    """Dispatch on ``config.method``."""
    config = config or MethodConfig()
    if config.method == "RSD":
        return solve_rsd(obj, C0, config, callback)
    if config.method == "RCG":
        return solve_rcg(obj, C0, config, callback)
    return solve_rlbfgs(obj, C0, config, callback)
