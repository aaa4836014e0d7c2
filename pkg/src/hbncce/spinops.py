"""Spin-operator algebra and small dense Hermitian matrix kernels.

All matrices are complex, dense, and small (dimension <= a few hundred).
Spin matrices use the Iz eigenbasis ordered m = I, I-1, ..., -I.
"""

from dataclasses import dataclass

import numpy as np

HERMITICITY_TOL = 1.0e-10


class NonHermitianError(ValueError):
    """Raised when a matrix expected to be Hermitian is not."""


@dataclass(frozen=True)
class SpinMatrices:
    """Angular-momentum matrices for a single spin (dimensionless, hbar=1)."""

    dim: int
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    @property
    def plus(self):
        return self.x + 1j * self.y

    @property
    def minus(self):
        return self.x - 1j * self.y

    @property
    def identity(self):
        return np.eye(self.dim, dtype=complex)


@dataclass(frozen=True)
class HermitianEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""

    values: np.ndarray
    vectors: np.ndarray


@dataclass(frozen=True)
class Propagator:
    """Unitary U = exp(-i H t) for H in rad/us and t in us."""

    matrix: np.ndarray
    t: float
    h_ref: str = ""


def spin_matrices(spin):
    """Build Ix, Iy, Iz for a spin quantum number I (half-integer).

    Basis states are ordered m = I ... -I, so Iz is diag(I, I-1, ..., -I).
    """
    two_i = 2.0 * spin
    if spin < 0 or abs(two_i - round(two_i)) > 1.0e-12:
        raise ValueError(f"spin must be a nonnegative half-integer, got {spin}")
    dim = int(round(two_i)) + 1
    m = spin - np.arange(dim)
    iz = np.diag(m).astype(complex)
    # <m+1| I+ |m> = sqrt(I(I+1) - m(m+1)); with descending order the
    # raising operator populates the superdiagonal.
    ladder = np.sqrt(spin * (spin + 1.0) - m[1:] * (m[1:] + 1.0))
    iplus = np.zeros((dim, dim), dtype=complex)
    iplus[np.arange(dim - 1), np.arange(1, dim)] = ladder
    ix = 0.5 * (iplus + iplus.conj().T)
    iy = -0.5j * (iplus - iplus.conj().T)
    return SpinMatrices(dim=dim, x=ix, y=iy, z=iz)


def check_hermitian(mat, tol=HERMITICITY_TOL, scale=None):
    """Raise NonHermitianError if max|M - M^dag| exceeds tol (relative to scale)."""
    mat = np.asarray(mat)
    dev = np.max(np.abs(mat - mat.conj().T))
    ref = scale if scale is not None else max(1.0, np.max(np.abs(mat)))
    if dev > tol * ref:
        raise NonHermitianError(
            f"matrix deviates from Hermiticity by {dev:.3e} (tol {tol * ref:.3e})"
        )


def eig_hermitian(mat, tol=HERMITICITY_TOL):
    """Eigendecompose a Hermitian matrix; ascending eigenvalues.

    Deterministic: identical input bits give identical output bits (single
    LAPACK code path, no randomness).
    """
    mat = np.ascontiguousarray(mat, dtype=complex)
    check_hermitian(mat, tol=tol)
    values, vectors = np.linalg.eigh(mat)
    return HermitianEig(values=values, vectors=vectors)


def propagator(ham, t, h_ref=""):
    """U = exp(-i H t) by eigendecomposition; H in rad/us, t in us >= 0."""
    if t < 0:
        raise ValueError("propagation time must be nonnegative")
    eig = eig_hermitian(ham)
    phases = np.exp(-1j * eig.values * t)
    u = (eig.vectors * phases) @ eig.vectors.conj().T
    return Propagator(matrix=u, t=t, h_ref=h_ref)


def propagators_on_grid(eig, times):
    """Stack of U(t) = V exp(-i w t) V^dag for each t, shape (nt, d, d)."""
    times = np.asarray(times, dtype=float)
    phases = np.exp(-1j * np.outer(times, eig.values))
    return np.einsum("ij,tj,kj->tik", eig.vectors, phases, eig.vectors.conj())


def kron_all(mats):
    """Kronecker product of a sequence of matrices (left to right)."""
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def embed(op, dims, position):
    """Embed a single-subsystem operator into a product space.

    dims is the list of subspace dimensions; position indexes the subsystem
    the operator acts on.  Identity everywhere else.
    """
    mats = [np.eye(d, dtype=complex) for d in dims]
    mats[position] = op
    return kron_all(mats)
