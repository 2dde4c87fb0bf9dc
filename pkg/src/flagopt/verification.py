"""Brute-force oracles used to validate the geometry and the ROHF derivatives.

Nothing here reuses the contraction, series or exponentiation code that it
checks: J/K are explicit loops, transport is a dense matrix exponential of the
operator assembled from explicit commutators, and the Hessian coupling terms
are written out block by block.
"""

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .geometry import TangentBlocks, mo_to_dm, retract, transport_blocks
from .optimizers import MethodConfig, _rlbfgs

DENSE_DIM_CAP = 200


@dataclass(frozen=True)
class FDConfig:
    step: float = 1e-4

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")


def _energy_fn(obj):
    return obj.energy if hasattr(obj, "energy") else obj


def fd_directional_derivative(obj, point, k, cfg=FDConfig()):
    """Central difference of ``E(retract(point, t k))`` at ``t = 0``."""
    E = _energy_fn(obj)
    h = cfg.step
    return (E(retract(point, h * k)) - E(retract(point, -h * k))) / (2.0 * h)


def fd_second_derivative(obj, point, k, cfg=FDConfig()):
    """Three-point second difference of ``E(retract(point, t k))`` at ``t = 0``."""
    E = _energy_fn(obj)
    h = cfg.step
    return (E(retract(point, h * k)) - 2.0 * E(point) + E(retract(point, -h * k))) / h**2


def _dense_generator(shape, blocks):
    # explicit element-by-element placement of an antisymmetric generator
    ni, na, _ = shape.sizes
    offsets = ((0, ni), (0, ni + na), (ni, ni + na))
    K = np.zeros((shape.n_basis, shape.n_basis))
    for (r0, c0), block in zip(offsets, blocks):
        for i in range(block.shape[0]):
            for j in range(block.shape[1]):
                K[r0 + i, c0 + j] += block[i, j]
                K[c0 + j, r0 + i] -= block[i, j]
    return K


def _read_blocks(shape, M):
    ni, na, ne = shape.sizes
    n1 = ni + na
    return TangentBlocks(shape, M[:ni, ni:n1].copy(), M[:ni, n1:].copy(), M[ni:n1, n1:].copy())


def dense_phi_matrix(k):
    """Matrix of ``v -> 1/2 Proj([kappa, v])`` in the canonical basis of tangent blocks."""
    shape = k.shape
    dim = shape.dim
    kappa = _dense_generator(shape, k.blocks)
    M = np.zeros((dim, dim))
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = 1.0
        basis = TangentBlocks.from_vector(shape, e)
        V = _dense_generator(shape, basis.blocks)
        M[:, j] = 0.5 * _read_blocks(shape, kappa @ V - V @ kappa).to_vector()
    return M


def dense_transport_oracle(k, k2):
    """``exp(-phi_k)(k2)`` through a dense matrix exponential (no series truncation)."""
    if k.shape.dim > DENSE_DIM_CAP:
        raise ValueError(f"tangent dimension {k.shape.dim} exceeds the dense cap {DENSE_DIM_CAP}")
    if k.shape.dim == 0:
        return k2
    M = dense_phi_matrix(k)
    return TangentBlocks.from_vector(k.shape, scipy.linalg.expm(-M) @ k2.to_vector())


def brute_force_jk(eri, P):
    """Coulomb and exchange matrices by explicit quadruple loops."""
    eri = np.asarray(eri)
    P = np.asarray(P)
    n = P.shape[0]
    J = np.zeros((n, n))
    K = np.zeros((n, n))
    for p in range(n):
        for q in range(n):
            jpq = kpq = 0.0
            for r in range(n):
                for s in range(n):
                    jpq += eri[p, q, r, s] * P[r, s]
                    kpq += eri[p, r, q, s] * P[r, s]
            J[p, q] = jpq
            K[p, q] = kpq
    return J, K


def brute_force_fock(dm, ints):
    JI, KI = brute_force_jk(ints.eri, dm.Pi_I)
    JA, KA = brute_force_jk(ints.eri, dm.Pi_A)
    F_I = ints.h + 2 * JI + JA - KI - 0.5 * KA
    F_A = 0.5 * (ints.h + 2 * JI + JA - KI - KA)
    return F_I, F_A


def omega_terms(point, k, ints):
    """Hessian terms beyond the Fock-diagonal Sylvester part, block by block.

    With ``a, b, c = k_ia, k_ie, k_ae``, MO-frame Fock blocks and
    ``lambda_1``/``lambda_2`` the symmetric matrices built from ``k``::

        Omega_X = b (2F_I - F_A)_EA + (F_I - 2F_A)_IE c^T
                  + (2J - K)(lambda_1)_IA + J(lambda_2)_IA
        Omega_Y = a (2F_I - F_A)_AE - (F_I + F_A)_IA c
                  + 2 (2J - K)(lambda_1)_IE + (2J - K)(lambda_2)_IE
        Omega_Z = a^T (F_I - 2F_A)_IE - (F_I + F_A)_AI b
                  + (2J - K)(lambda_1)_AE + (J - K)(lambda_2)_AE
    """
    s = point.shape
    C = point.C
    ni, na, ne = s.sizes
    I, A, E = s.internal, s.active, s.external
    F_I, F_A = brute_force_fock(mo_to_dm(point), ints)
    FI, FA = C.T @ F_I @ C, C.T @ F_A @ C
    a, b, c = k.blocks

    lam1 = np.zeros((s.n_basis, s.n_basis))
    lam1[I, A], lam1[I, E] = a, b
    lam1 = lam1 + lam1.T
    lam2 = np.zeros((s.n_basis, s.n_basis))
    lam2[I, A], lam2[A, E] = -a, c
    lam2 = lam2 + lam2.T
    J1, K1 = (C.T @ M @ C for M in brute_force_jk(ints.eri, C @ lam1 @ C.T))
    J2, K2 = (C.T @ M @ C for M in brute_force_jk(ints.eri, C @ lam2 @ C.T))

    X = (b @ (2 * FI - FA)[E, A] + (FI - 2 * FA)[I, E] @ c.T
         + (2 * J1 - K1)[I, A] + J2[I, A])
    Y = (a @ (2 * FI - FA)[A, E] - (FI + FA)[I, A] @ c
         + 2 * (2 * J1 - K1)[I, E] + (2 * J2 - K2)[I, E])
    Z = (a.T @ (FI - 2 * FA)[I, E] - (FI + FA)[A, I] @ b
         + (2 * J1 - K1)[A, E] + (J2 - K2)[A, E])
    return TangentBlocks(s, X.reshape(ni, na), Y.reshape(ni, ne), Z.reshape(na, ne))


def _class_sizes(shape):
    # a FlagShape or an (n_internal, n_active[, n_external]) tuple; the tuple
    # form admits the empty partition, which FlagShape rejects
    if hasattr(shape, "n_internal"):
        return shape.n_internal, shape.n_active
    ni, na = int(shape[0]), int(shape[1])
    if ni < 0 or na < 0:
        raise ValueError("class sizes must be non-negative")
    return ni, na


def linear_model_minimum(eigenvalues, shape):
    """Minimum of the interaction-free energy: fill the lowest levels, doubly then singly.

    Parameters
    ----------
    eigenvalues : array_like
        Eigenvalues of ``h`` (sorted here, so any order is accepted).
    shape : FlagShape or tuple
        Partition, or ``(n_internal, n_active[, n_external])``.
    """
    ni, na = _class_sizes(shape)
    w = np.sort(np.asarray(eigenvalues, dtype=float))
    if ni + na > w.size:
        raise ValueError("more occupied orbitals than eigenvalues")
    return float(2.0 * w[:ni].sum() + w[ni:ni + na].sum())


def exhaustive_linear_minimum(eigenvalues, shape):
    """Same quantity by enumerating every assignment of levels to the two classes."""
    ni, na = _class_sizes(shape)
    w = np.asarray(eigenvalues, dtype=float)
    best = np.inf
    levels = range(len(w))
    for internal in itertools.combinations(levels, ni):
        rest = [p for p in levels if p not in internal]
        for active in itertools.combinations(rest, na):
            best = min(best, 2.0 * w[list(internal)].sum() + w[list(active)].sum())
    return float(best)


def _identity_transport(step, v):
    return v


def transport_ablation(obj, C0, config=None):
    """Run R-LBFGS with parallel-transported history and with history copied unchanged.

    The second run is a deliberately naive reference and is only reachable
    from here. Returns ``{"transported": result, "naive": result}``.
    """
    config = config or MethodConfig(method="RLBFGS")
    return {
        "transported": _rlbfgs(obj, C0, config, None, transport_blocks),
        "naive": _rlbfgs(obj, C0, config, None, _identity_transport),
    }
