"""High-spin ROHF energy and its derivatives on the flag manifold.

Internal orbitals are doubly occupied and active orbitals singly occupied
with parallel spins. All Fock-type matrices below are built in the AO frame
and transformed to the MO frame of the current point when blocks are needed;
``M_XY`` means ``C_X^T M C_Y``.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError, ShapeError
from .geometry import (
    FlagPoint,
    TangentBlocks,
    embed,
    extract,
    mo_to_dm,
    project_to_tangent,
)
from .integrals import coulomb, exchange

#: smallest admissible preconditioner denominator (Hartree)
PRECONDITIONER_FLOOR = 1e-3


@dataclass(frozen=True, eq=False)
class FockPair:
    F_I: np.ndarray
    F_A: np.ndarray


def _check(point, ints):
    if point.shape.n_basis != ints.n_orb:
        raise ShapeError(
            f"point has {point.shape.n_basis} orbitals, integrals have {ints.n_orb}"
        )


def _jk_combo(ints, P_I, P_A):
    JI, KI = coulomb(ints, P_I), exchange(ints, P_I)
    JA, KA = coulomb(ints, P_A), exchange(ints, P_A)
    return JI, KI, JA, KA


def fock_pair(dm, ints):
    """Internal and active Fock matrices of a projector pair."""
    JI, KI, JA, KA = _jk_combo(ints, dm.Pi_I, dm.Pi_A)
    common = ints.h + 2.0 * JI + JA - KI
    return FockPair(common - 0.5 * KA, 0.5 * (common - KA))


def energy_from_dm(dm, ints):
    """Energy as an explicit quadratic function of the projectors."""
    PI, PA = dm.Pi_I, dm.Pi_A
    JI, KI, JA, KA = _jk_combo(ints, PI, PA)
    return (
        ints.e_core
        + 2.0 * np.sum(ints.h * PI)
        + np.sum(ints.h * PA)
        + np.sum((2.0 * JI - KI) * (PI + PA))
        + 0.5 * np.sum((JA - KA) * PA)
    )


def energy(point, ints):
    """High-spin ROHF energy (Hartree) of the determinant built from ``point``."""
    _check(point, ints)
    return float(energy_from_dm(mo_to_dm(point), ints))


def euclidean_gradient(point, ints, fock=None):
    """Frobenius gradient of the energy with respect to ``C``.

    Internal columns are ``4 F_I C_I``, active columns ``4 F_A C_A``,
    external columns zero.
    """
    fock = fock or fock_pair(mo_to_dm(point), ints)
    s = point.shape
    G = np.zeros_like(point.C)
    G[:, s.internal] = 4.0 * fock.F_I @ point.internal
    G[:, s.active] = 4.0 * fock.F_A @ point.active
    return G


def riemannian_gradient(point, ints, fock=None):
    _check(point, ints)
    return project_to_tangent(point, euclidean_gradient(point, ints, fock))


def _mo(point, M):
    return point.C.T @ M @ point.C


def _ao(point, M):
    return point.C @ M @ point.C.T


def _masks(shape):
    n = shape.n_basis
    E_I = np.zeros((n, n))
    E_A = np.zeros((n, n))
    E_I[shape.internal, shape.internal] = np.eye(shape.n_internal)
    E_A[shape.active, shape.active] = np.eye(shape.n_active)
    return E_I, E_A


def _comm(a, b):
    return a @ b - b @ a


def hessian_vector(point, k, ints, fock=None):
    """Riemannian Hessian of the energy applied to ``k``.

    The Hessian is the symmetric bilinear form obtained from the second
    derivative of ``E(retract(C, t k))``. In the MO frame, with ``E_X`` the
    orthogonal projector on class ``X`` and ``dF`` the Fock response to the
    density change ``[kappa, E_X]``,

        H(k) = -Proj( [E_I, 2 dF_I] + [E_A, 2 dF_A]
                      + sum_X [E_X, [F_X, kappa]] + [[kappa, E_X], F_X] ).

    The density changes are ``-lambda_1`` and ``-lambda_2`` in the usual
    block notation, so the two-electron part is the familiar
    ``J(lambda)``/``K(lambda)`` contraction.
    """
    _check(point, ints)
    if k.shape != point.shape:
        raise ShapeError(f"shape mismatch: {k.shape} vs {point.shape}")
    fock = fock or fock_pair(mo_to_dm(point), ints)
    kappa = embed(k)
    E_I, E_A = _masks(point.shape)
    FI, FA = _mo(point, fock.F_I), _mo(point, fock.F_A)

    dI = _ao(point, _comm(kappa, E_I))
    dA = _ao(point, _comm(kappa, E_A))
    JI, KI, JA, KA = _jk_combo(ints, dI, dA)
    dFI2 = _mo(point, 4.0 * JI + 2.0 * JA - 2.0 * KI - KA)
    dFA2 = _mo(point, 2.0 * JI + JA - KI - KA)

    W = _comm(E_I, dFI2) + _comm(E_A, dFA2)
    for E_X, F_X in ((E_I, FI), (E_A, FA)):
        W += _comm(E_X, _comm(F_X, kappa)) + _comm(_comm(kappa, E_X), F_X)
    return extract(point.shape, -W)


def fock_blocks(point, fock):
    """MO-frame diagonal blocks used by the approximate Hessian."""
    s = point.shape
    I, A, E = s.internal, s.active, s.external
    FI, FA = _mo(point, fock.F_I), _mo(point, fock.F_A)
    D = FI - FA
    return {
        "D_II": D[I, I], "D_AA": D[A, A],
        "FI_II": FI[I, I], "FI_EE": FI[E, E],
        "FA_AA": FA[A, A], "FA_EE": FA[E, E],
    }


def approx_hessian_vector(point, k, ints, fock=None):
    """Fock-only part of the Hessian (two-electron and coupling terms dropped).

    Each block is a Sylvester operator:
    ``X = 2(k_ia D_AA - D_II k_ia)`` with ``D = F_I - F_A``,
    ``Y = 2(k_ie (F_I)_EE - (F_I)_II k_ie)``,
    ``Z = 2(k_ae (F_A)_EE - (F_A)_AA k_ae)``.
    """
    _check(point, ints)
    fock = fock or fock_pair(mo_to_dm(point), ints)
    b = fock_blocks(point, fock)
    return TangentBlocks(
        point.shape,
        2.0 * (k.k_ia @ b["D_AA"] - b["D_II"] @ k.k_ia),
        2.0 * (k.k_ie @ b["FI_EE"] - b["FI_II"] @ k.k_ie),
        2.0 * (k.k_ae @ b["FA_EE"] - b["FA_AA"] @ k.k_ae),
    )


def _eigh(M):
    try:
        return np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc


class SylvesterPreconditioner:
    """Inverse of the approximate Hessian, with a level shift when needed.

    Each block equation ``2(K B - A K) = G`` is diagonalised by the
    eigenvectors of ``A`` and ``B``; the solution in the eigenframe is
    ``G_ij / (2(b_j - a_i) + shift)``. The shift is the smallest value that
    lifts every denominator to at least ``floor``.

    The operator is built once from a point and may be applied to tangent
    blocks at other points (the frozen restart strategy relies on this).
    """

    def __init__(self, point, ints, fock=None, floor=PRECONDITIONER_FLOOR):
        fock = fock or fock_pair(mo_to_dm(point), ints)
        fb = fock_blocks(point, fock)
        self.shape = point.shape
        self.floor = floor
        pairs = ((fb["D_II"], fb["D_AA"]), (fb["FI_II"], fb["FI_EE"]), (fb["FA_AA"], fb["FA_EE"]))
        self._frames = []
        raw = []
        for left, right in pairs:
            wl, Ul = _eigh(left)
            wr, Ur = _eigh(right)
            denom = 2.0 * (wr[None, :] - wl[:, None])
            self._frames.append((Ul, Ur))
            raw.append(denom)
        self.raw_denominators = raw
        self.diagonal = np.concatenate([d.ravel() for d in raw])
        lowest = self.diagonal.min() if self.diagonal.size else floor
        self.shift = max(0.0, floor - lowest)
        self._denominators = [np.maximum(d + self.shift, floor) for d in raw]

    def __call__(self, g):
        if g.shape != self.shape:
            raise ShapeError(f"shape mismatch: {g.shape} vs {self.shape}")
        out = []
        for block, (Ul, Ur), denom in zip(g.blocks, self._frames, self._denominators):
            out.append(Ul @ ((Ul.T @ block @ Ur) / denom) @ Ur.T)
        return TangentBlocks(self.shape, *out)


def precondition(point, g, ints, fock=None):
    """Solve ``approx_hessian_vector(point, k) = g`` (shifted if indefinite)."""
    _check(point, ints)
    return SylvesterPreconditioner(point, ints, fock)(g)


def core_guess(ints, shape):
    """Eigenvectors of ``h`` by ascending eigenvalue.

    Each eigenvector's first non-negligible component is made positive so the
    result is reproducible.
    """
    if shape.n_basis != ints.n_orb:
        raise ShapeError(f"shape has {shape.n_basis} orbitals, integrals have {ints.n_orb}")
    w, V = np.linalg.eigh(ints.h)
    order = np.argsort(w, kind="stable")
    V = V[:, order]
    for j in range(V.shape[1]):
        col = V[:, j]
        lead = np.flatnonzero(np.abs(col) > 1e-12)
        if lead.size and col[lead[0]] < 0:
            V[:, j] = -col
    return FlagPoint(shape, V)


class ROHFObjective:
    """Energy, gradient and preconditioner of high-spin ROHF for a fixed partition.

    The most recent Fock build is cached, so asking for the energy and then the
    gradient at the same point costs one set of J/K contractions.
    """

    def __init__(self, ints, shape):
        if shape.n_basis != ints.n_orb:
            raise ShapeError(f"shape has {shape.n_basis} orbitals, integrals have {ints.n_orb}")
        self.ints = ints
        self.shape = shape
        self._cache_key = None
        self._cache = None

    def _fock(self, point):
        if self._cache_key is not point:
            dm = mo_to_dm(point)
            self._cache = (dm, fock_pair(dm, self.ints))
            self._cache_key = point
        return self._cache

    def energy(self, point):
        dm, fock = self._fock(point)
        # E = e_core + Tr(h (Pi_I + Pi_A/2)) + Tr(F_I Pi_I) + Tr(F_A Pi_A)
        h = self.ints.h
        return float(
            self.ints.e_core
            + np.sum(h * (dm.Pi_I + 0.5 * dm.Pi_A))
            + np.sum(fock.F_I * dm.Pi_I)
            + np.sum(fock.F_A * dm.Pi_A)
        )

    def gradient(self, point):
        return riemannian_gradient(point, self.ints, self._fock(point)[1])

    def hessian_vector(self, point, k):
        return hessian_vector(point, k, self.ints, self._fock(point)[1])

    def preconditioner(self, point):
        return SylvesterPreconditioner(point, self.ints, self._fock(point)[1])

    def precondition(self, point, g):
        return self.preconditioner(point)(g)
