"""Geometry of the flag manifold ``Flag(N_I, N_I + N_A; R^N_b)`` in MO form.

A point is an orthogonal coefficient matrix ``C`` whose columns are split into
internal, active and external orbitals. Rotations inside one class are gauge,
so a tangent vector at ``C`` is ``C @ kappa`` with ``kappa`` antisymmetric and
zero on its diagonal blocks. Tangent vectors are always handled through their
three off-diagonal blocks ``(k_ia, k_ie, k_ae)``.

The exponential map is ``C @ expm(kappa)`` and parallel transport along it is
``k2 -> exp(-phi_kappa)(k2)`` with ``phi_kappa = 1/2 Proj([kappa, .])``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NumericalError, ShapeError

ORTHOGONALITY_TOL = 1e-10

#: relative size of the last series term at which transport stops
TRANSPORT_RTOL = 1e-16
TRANSPORT_MAX_TERMS = 200
#: longest step transported with a single series
TRANSPORT_SUBSTEP_NORM = 8.0


@dataclass(frozen=True)
class FlagShape:
    """Orbital partition ``n_basis = n_internal + n_active + n_external``."""

    n_basis: int
    n_internal: int
    n_active: int
    n_external: int = field(init=False)

    def __post_init__(self):
        for name in ("n_basis", "n_internal", "n_active"):
            value = getattr(self, name)
            if int(value) != value:
                raise ShapeError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.n_basis < 1:
            raise ShapeError("n_basis must be positive")
        if self.n_internal < 0 or self.n_active < 0:
            raise ShapeError("orbital counts must be non-negative")
        if self.n_internal + self.n_active < 1:
            raise ShapeError("at least one occupied orbital is required")
        n_external = self.n_basis - self.n_internal - self.n_active
        if n_external < 0:
            raise ShapeError(
                f"n_internal + n_active = {self.n_internal + self.n_active} "
                f"exceeds n_basis = {self.n_basis}"
            )
        object.__setattr__(self, "n_external", n_external)

    @classmethod
    def from_sizes(cls, n_internal, n_active, n_external):
        return cls(n_internal + n_active + n_external, n_internal, n_active)

    @property
    def sizes(self):
        return (self.n_internal, self.n_active, self.n_external)

    @property
    def internal(self):
        return slice(0, self.n_internal)

    @property
    def active(self):
        return slice(self.n_internal, self.n_internal + self.n_active)

    @property
    def external(self):
        return slice(self.n_internal + self.n_active, self.n_basis)

    @property
    def n_electrons(self):
        """Electron count of the high-spin determinant."""
        return 2 * self.n_internal + self.n_active

    @property
    def dim(self):
        """Dimension of the manifold (number of non-redundant rotations)."""
        ni, na, ne = self.sizes
        return ni * na + ni * ne + na * ne


@dataclass(frozen=True)
class FlagPoint:
    """Orthogonal MO coefficient matrix ``C`` (columns = orbitals)."""

    shape: FlagShape
    C: np.ndarray

    def __post_init__(self):
        C = np.array(self.C, dtype=float)
        n = self.shape.n_basis
        if C.shape != (n, n):
            raise ShapeError(f"C has shape {C.shape}, expected {(n, n)}")
        if not np.all(np.isfinite(C)):
            raise NumericalError("C has non-finite entries")
        err = orthogonality_error(C)
        if err > ORTHOGONALITY_TOL:
            raise ValueError(f"C is not orthogonal: ||C^T C - I||_F = {err:.3e}")
        C.flags.writeable = False
        object.__setattr__(self, "C", C)

    @property
    def internal(self):
        return self.C[:, self.shape.internal]

    @property
    def active(self):
        return self.C[:, self.shape.active]

    @property
    def external(self):
        return self.C[:, self.shape.external]


def _as_block(value, rows, cols, name):
    arr = np.array(value, dtype=float)
    if arr.size == 0 and rows * cols == 0:
        arr = arr.reshape(rows, cols)
    if arr.shape != (rows, cols):
        raise ShapeError(f"{name} has shape {arr.shape}, expected {(rows, cols)}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class TangentBlocks:
    """Off-diagonal blocks of an antisymmetric generator ``kappa``.

    Supports the vector-space operations (``+``, ``-``, scalar ``*`` and
    ``/``); inner products go through :func:`metric`.
    """

    shape: FlagShape
    k_ia: np.ndarray
    k_ie: np.ndarray
    k_ae: np.ndarray

    def __post_init__(self):
        ni, na, ne = self.shape.sizes
        object.__setattr__(self, "k_ia", _as_block(self.k_ia, ni, na, "k_ia"))
        object.__setattr__(self, "k_ie", _as_block(self.k_ie, ni, ne, "k_ie"))
        object.__setattr__(self, "k_ae", _as_block(self.k_ae, na, ne, "k_ae"))

    @classmethod
    def zeros(cls, shape):
        ni, na, ne = shape.sizes
        return cls(shape, np.zeros((ni, na)), np.zeros((ni, ne)), np.zeros((na, ne)))

    @classmethod
    def from_vector(cls, shape, vec):
        """Inverse of :meth:`to_vector` (row-major IA, IE, AE)."""
        ni, na, ne = shape.sizes
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (shape.dim,):
            raise ShapeError(f"vector has shape {vec.shape}, expected {(shape.dim,)}")
        a, b = ni * na, ni * na + ni * ne
        return cls(
            shape,
            vec[:a].reshape(ni, na),
            vec[a:b].reshape(ni, ne),
            vec[b:].reshape(na, ne),
        )

    @property
    def blocks(self):
        return (self.k_ia, self.k_ie, self.k_ae)

    def to_vector(self):
        return np.concatenate([b.ravel() for b in self.blocks])

    def norm(self):
        """Plain Frobenius norm of the three blocks (no factor 2)."""
        return float(np.sqrt(sum(np.sum(b * b) for b in self.blocks)))

    def _check(self, other):
        if not isinstance(other, TangentBlocks):
            return NotImplemented
        if other.shape != self.shape:
            raise ShapeError(f"shape mismatch: {self.shape} vs {other.shape}")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return TangentBlocks(self.shape, *(a + b for a, b in zip(self.blocks, other.blocks)))

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return TangentBlocks(self.shape, *(a - b for a, b in zip(self.blocks, other.blocks)))

    def __neg__(self):
        return TangentBlocks(self.shape, *(-a for a in self.blocks))

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return TangentBlocks(self.shape, *(scalar * a for a in self.blocks))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return TangentBlocks(self.shape, *(a / scalar for a in self.blocks))

    def __repr__(self):
        return f"TangentBlocks(shape={self.shape.sizes}, norm={self.norm():.6g})"


@dataclass(frozen=True, eq=False)
class DensityPair:
    """Orthogonal projectors onto the internal and active subspaces."""

    Pi_I: np.ndarray
    Pi_A: np.ndarray

    def invariant_errors(self, shape):
        """Return the five invariant residuals as a dict."""
        PI, PA = self.Pi_I, self.Pi_A
        return {
            "idempotency_I": float(np.linalg.norm(PI @ PI - PI)),
            "idempotency_A": float(np.linalg.norm(PA @ PA - PA)),
            "trace_I": float(abs(np.trace(PI) - shape.n_internal)),
            "trace_A": float(abs(np.trace(PA) - shape.n_active)),
            "orthogonality": float(np.linalg.norm(PI @ PA)),
        }


def orthogonality_error(C):
    C = np.asarray(C)
    return float(np.linalg.norm(C.T @ C - np.eye(C.shape[1])))


def _check_shape(k, shape):
    if k.shape != shape:
        raise ShapeError(f"shape mismatch: {k.shape} vs {shape}")


def embed(k):
    """Assemble the full antisymmetric ``N_b x N_b`` generator."""
    s = k.shape
    kappa = np.zeros((s.n_basis, s.n_basis))
    I, A, E = s.internal, s.active, s.external
    kappa[I, A] = k.k_ia
    kappa[I, E] = k.k_ie
    kappa[A, E] = k.k_ae
    kappa[A, I] = -k.k_ia.T
    kappa[E, I] = -k.k_ie.T
    kappa[E, A] = -k.k_ae.T
    return kappa


def extract(shape, kappa):
    """Read the upper off-diagonal blocks of a square matrix."""
    kappa = np.asarray(kappa, dtype=float)
    if kappa.shape != (shape.n_basis, shape.n_basis):
        raise ShapeError(
            f"matrix has shape {kappa.shape}, expected {(shape.n_basis,) * 2}"
        )
    I, A, E = shape.internal, shape.active, shape.external
    return TangentBlocks(shape, kappa[I, A], kappa[I, E], kappa[A, E])


def project_to_tangent(point, M):
    """Orthogonal projection of an ambient matrix onto the tangent space at ``point``.

    Returns the blocks of ``1/2 (C^T M - M^T C)`` with the diagonal blocks
    dropped.
    """
    M = np.asarray(M, dtype=float)
    C = point.C
    if M.shape != C.shape:
        raise ShapeError(f"matrix has shape {M.shape}, expected {C.shape}")
    CtM = C.T @ M
    return extract(point.shape, 0.5 * (CtM - CtM.T))


def metric(k, k2):
    """Riemannian metric ``Tr(kappa^T kappa')``, twice the blockwise inner product."""
    _check_shape(k, k2.shape)
    return 2.0 * float(sum(np.sum(a * b) for a, b in zip(k.blocks, k2.blocks)))


def expm_antisymmetric(kappa):
    """Matrix exponential of a real antisymmetric matrix.

    Uses the eigendecomposition of the Hermitian matrix ``1j * kappa``, which
    keeps the result orthogonal to machine precision regardless of the norm of
    ``kappa``.
    """
    kappa = np.asarray(kappa, dtype=float)
    if not np.all(np.isfinite(kappa)):
        raise NumericalError("generator has non-finite entries")
    if kappa.size == 0 or not np.any(kappa):
        return np.eye(kappa.shape[0])
    w, V = np.linalg.eigh(1j * kappa)
    U = (V * np.exp(-1j * w)) @ V.conj().T
    return U.real


def retract(point, k):
    """Exponential map ``C -> C @ expm(embed(k))``."""
    _check_shape(k, point.shape)
    if not all(np.all(np.isfinite(b)) for b in k.blocks):
        raise NumericalError("tangent vector has non-finite entries")
    return FlagPoint(point.shape, point.C @ expm_antisymmetric(embed(k)))


def phi(k, k2):
    """The operator ``phi_k(k2) = 1/2 Proj([kappa, kappa'])`` in block form."""
    _check_shape(k, k2.shape)
    a, b, c = k.blocks
    a2, b2, c2 = k2.blocks
    return TangentBlocks(
        k.shape,
        0.5 * (-b @ c2.T + b2 @ c.T),
        0.5 * (a @ c2 - a2 @ c),
        0.5 * (-a.T @ b2 + a2.T @ b),
    )


def _transport_series(k, k2):
    scale = k2.norm()
    if scale == 0.0:
        return k2
    total = k2
    term = k2
    with np.errstate(over="ignore", invalid="ignore"):
        # divergence shows up as a non-finite term norm and is reported below
        for n in range(TRANSPORT_MAX_TERMS):
            term = phi(k, term) * (-1.0 / (n + 1))
            tnorm = term.norm()
            if not np.isfinite(tnorm):
                break
            total = total + term
            if tnorm < TRANSPORT_RTOL * scale:
                return total
    raise NumericalError(
        f"transport series did not converge in {TRANSPORT_MAX_TERMS} terms "
        f"(|k| = {k.norm():.3e})"
    )


def transport_blocks(k, k2):
    """Apply ``exp(-phi_k)`` to ``k2`` by summing its power series.

    Terms ``v_{n+1} = -phi_k(v_n) / (n + 1)`` are accumulated until the
    latest term drops below ``TRANSPORT_RTOL * |k2|``. Since ``phi_k`` is
    linear in ``k``, a long step is split into ``m`` equal pieces and the
    series for ``k / m`` is applied ``m`` times; steps with
    ``|k| <= TRANSPORT_SUBSTEP_NORM`` use a single series.
    """
    _check_shape(k, k2.shape)
    nk = k.norm()
    if not np.isfinite(nk):
        raise NumericalError("transport direction has non-finite entries")
    m = max(1, math.ceil(nk / TRANSPORT_SUBSTEP_NORM))
    if m == 1:
        return _transport_series(k, k2)
    piece = k / m
    for _ in range(m):
        k2 = _transport_series(piece, k2)
    return k2


def transport(point, k, k2):
    """Parallel transport of ``k2`` along the geodesic ``t -> retract(point, t k)``.

    Returns ``(retract(point, k), exp(-phi_k)(k2))``.
    """
    _check_shape(k, point.shape)
    return retract(point, k), transport_blocks(k, k2)


def mo_to_dm(point):
    """Projector pair spanned by the internal and active columns."""
    CI, CA = point.internal, point.active
    return DensityPair(CI @ CI.T, CA @ CA.T)


def rohf_densities(dm):
    """Total, alpha and beta densities of the high-spin determinant."""
    P_alpha = dm.Pi_I + dm.Pi_A
    P_beta = dm.Pi_I.copy()
    return P_alpha + P_beta, P_alpha, P_beta


def random_point(shape, seed=None):
    """Seeded random orthogonal matrix (Q factor of a Gaussian matrix)."""
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((shape.n_basis, shape.n_basis)))
    Q = Q * np.sign(np.diag(R))
    return FlagPoint(shape, Q)


def random_tangent(shape, seed=None):
    rng = np.random.default_rng(seed)
    ni, na, ne = shape.sizes
    return TangentBlocks(
        shape,
        rng.standard_normal((ni, na)),
        rng.standard_normal((ni, ne)),
        rng.standard_normal((na, ne)),
    )
