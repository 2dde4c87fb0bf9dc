"""scikit-learn style front end: fit orbitals to a set of integrals."""

import os
import warnings

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ShapeError
from .geometry import FlagPoint, FlagShape, random_point
from .integrals import IntegralSet, parse_fcidump, read_fcidump
from .optimizers import MethodConfig, solve
from .rohf import ROHFObjective, core_guess, energy

PRECONDITIONERS = ("none", "sylvester")
GUESSES = ("core", "random")

#: polar correction above which a supplied guess triggers a warning
GUESS_DRIFT_WARN = 1e-6


def check_integrals(X):
    """Coerce ``X`` to an :class:`IntegralSet`.

    ``X`` may already be one, a path to an FCIDUMP file, or FCIDUMP text.
    """
    if isinstance(X, IntegralSet):
        return X
    if isinstance(X, os.PathLike):
        return read_fcidump(X)
    if isinstance(X, str):
        if "&FCI" in X.upper():
            return parse_fcidump(X)
        return read_fcidump(X)
    raise TypeError(f"expected IntegralSet, FCIDUMP path or text, got {type(X).__name__}")


def check_partition(ints, n_internal=None, n_active=None):
    """Orbital partition for ``ints``.

    Missing counts are taken from the electron count and spin in the FCIDUMP
    header (high spin: ``n_active = MS2``, ``n_internal = (NELEC - MS2) / 2``).
    """
    if n_internal is None or n_active is None:
        if ints.n_elec is None or ints.ms2 is None:
            raise ShapeError("n_internal and n_active are required when NELEC/MS2 are unknown")
        n_open = abs(ints.ms2)
        if (ints.n_elec - n_open) % 2:
            raise ShapeError(f"NELEC={ints.n_elec} and MS2={ints.ms2} have different parity")
        n_active = n_open if n_active is None else n_active
        n_internal = (ints.n_elec - n_open) // 2 if n_internal is None else n_internal
    shape = FlagShape(ints.n_orb, n_internal, n_active)
    if ints.n_elec is not None and shape.n_electrons != ints.n_elec:
        warnings.warn(
            f"partition holds {shape.n_electrons} electrons but NELEC={ints.n_elec}",
            stacklevel=2,
        )
    return shape


def orthonormalize_guess(C, shape):
    """Nearest orthogonal matrix (polar factor) to a supplied guess.

    Returns the :class:`FlagPoint` and the Frobenius size of the correction.
    """
    C = check_array(C, dtype=float, ensure_2d=True)
    if C.shape != (shape.n_basis, shape.n_basis):
        raise ShapeError(f"guess has shape {C.shape}, expected {(shape.n_basis,) * 2}")
    U, _ = scipy.linalg.polar(C)
    drift = float(np.linalg.norm(U - C))
    if drift > GUESS_DRIFT_WARN:
        warnings.warn(f"guess re-orthogonalized (correction {drift:.3e})", stacklevel=2)
    return FlagPoint(shape, U), drift


class ROHFSolver(BaseEstimator):
    """High-spin ROHF orbitals by Riemannian optimization on the flag manifold.

    Parameters
    ----------
    n_internal, n_active : int, optional
        Doubly and singly occupied orbital counts. Taken from the FCIDUMP
        header when omitted.
    method : {"RSD", "RCG", "RLBFGS"}
    beta_variant : {"FR", "PR", "HS"}
        Conjugate gradient update (RCG only).
    memory : int
        Stored pairs for R-LBFGS.
    restart : {"dynamic", "fixed"}
        Preconditioner refresh strategy for R-LBFGS.
    preconditioner : {"none", "sylvester"}
    tolerance : float
        Gradient-norm threshold.
    max_iterations : int
    guess : {"core", "random"} or array_like
        Initial orbitals; an array is re-orthogonalized by polar factorization.
    seed : int, optional
        Seed for ``guess="random"``.

    Attributes
    ----------
    coef_ : ndarray of shape (n_orb, n_orb)
        Optimized orbital coefficients, internal then active then external.
    point_ : FlagPoint
    energy_ : float
    grad_norm_ : float
    converged_ : bool
    n_iter_ : int
    trace_ : list of IterationRecord
    shape_ : FlagShape
    """

    def __init__(self, n_internal=None, n_active=None, method="RCG", beta_variant="PR",
                 memory=8, restart="dynamic", preconditioner="none", tolerance=1e-5,
                 max_iterations=1000, guess="core", seed=None):
        self.n_internal = n_internal
        self.n_active = n_active
        self.method = method
        self.beta_variant = beta_variant
        self.memory = memory
        self.restart = restart
        self.preconditioner = preconditioner
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.guess = guess
        self.seed = seed

    def _config(self):
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(
                f"preconditioner must be one of {PRECONDITIONERS}, got {self.preconditioner!r}"
            )
        return MethodConfig(
            method=self.method,
            beta_variant=self.beta_variant,
            memory=int(self.memory),
            restart=self.restart,
            use_preconditioner=self.preconditioner == "sylvester",
            tolerance=float(self.tolerance),
            max_iterations=int(self.max_iterations),
        )

    def _initial_point(self, ints, shape):
        guess = self.guess
        if isinstance(guess, str):
            if guess == "core":
                return core_guess(ints, shape)
            if guess == "random":
                return random_point(shape, self.seed)
            raise ValueError(f"guess must be one of {GUESSES} or an array, got {guess!r}")
        if isinstance(guess, FlagPoint):
            return FlagPoint(shape, guess.C)
        return orthonormalize_guess(guess, shape)[0]

    def fit(self, X, y=None, callback=None):
        """Optimize orbitals for the integrals ``X``.

        Parameters
        ----------
        X : IntegralSet, path or FCIDUMP text
        y : ignored
        callback : callable, optional
            Called as ``callback(record, point)`` after every iteration.
        """
        config = self._config()
        ints = check_integrals(X)
        shape = check_partition(ints, self.n_internal, self.n_active)
        C0 = self._initial_point(ints, shape)
        result = solve(ROHFObjective(ints, shape), C0, config, callback)

        self.shape_ = shape
        self.point_ = result.point
        self.coef_ = result.point.C
        self.energy_ = result.energy
        self.grad_norm_ = result.grad_norm
        self.converged_ = result.converged
        self.n_iter_ = result.n_iter
        self.trace_ = result.trace
        self.message_ = result.message
        return self

    def predict(self, X):
        """Energy of the fitted orbitals under the integrals ``X``."""
        check_is_fitted(self, "point_")
        ints = check_integrals(X)
        if ints.n_orb != self.shape_.n_basis:
            raise ShapeError(f"fitted on {self.shape_.n_basis} orbitals, got {ints.n_orb}")
        return energy(self.point_, ints)

    def score(self, X, y=None):
        """Negative energy, so that larger is better."""
        return -self.predict(X)

