"""Hamiltonian assembly for the S=1 defect and its nuclear-spin clusters.

All Hamiltonians are returned in angular units (rad/us); tensor inputs are
in MHz (see units module).  The electron basis is ordered m_s = +1, 0, -1,
matching spin_matrices(1).

Sign conventions: the electron Zeeman term is +gamma_e*B*Sz and the nuclear
Zeeman term is -gamma_n*B*Iz (B along the c-axis = z).  With these signs the
m_s = 0 / m_s = -1 anti-crossing sits at B = D/gamma_e, and in the m_s = +1
manifold the hyperfine field opposes the nuclear Zeeman field, which is what
produces the level-cancellation physics this package analyzes.
"""

from dataclasses import dataclass, field

import numpy as np

from .spinops import check_hermitian, kron_all, spin_matrices
from .units import GAMMA_E, mhz_to_rad_per_us, zeeman_rad_per_us

DIMENSION_GUARD = 10_000

#: Electron basis index of each m_s sublevel (spin_matrices(1) ordering).
MS_INDEX = {1: 0, 0: 1, -1: 2}

#: Minimum electron-sublevel gap (rad/us) for the second-order expansion.
MEDIATED_GAP_MIN = 1.0


class DimensionError(ValueError):
    """Cluster product space exceeds the dense-matrix dimension guard."""


class DegenerateManifoldError(ValueError):
    """Electron sublevels too close for a perturbative manifold treatment."""


@dataclass(frozen=True)
class CentralSpin:
    """S=1 central electron spin: zero-field splitting + Zeeman parameters.

    d and e are the axial and transverse zero-field splittings in MHz;
    gamma_e is in rad G^-1 ms^-1; qubit_levels is the ordered (a, b) pair of
    m_s labels forming the qubit.
    """

    d: float = 3480.0
    e: float = 50.0
    gamma_e: float = GAMMA_E
    qubit_levels: tuple = (0, 1)

    def __post_init__(self):
        a, b = self.qubit_levels
        if a == b or {a, b} - {-1, 0, 1}:
            raise ValueError(f"invalid qubit_levels {self.qubit_levels}")

    def sublevel_energy(self, m_s, field_gauss):
        """Unperturbed energy of sublevel m_s (rad/us): diagonal ZFS + Zeeman."""
        d = mhz_to_rad_per_us(self.d)
        return d * (m_s**2 - 2.0 / 3.0) + zeeman_rad_per_us(self.gamma_e, field_gauss) * m_s


@dataclass(frozen=True)
class SpinSystem:
    """Central spin + bath + static field: one simulated configuration."""

    central: CentralSpin
    bath: object
    field_gauss: float


@dataclass(frozen=True)
class ClusterHamiltonian:
    """Hermitian matrix on the (qubit x nuclei) product space, rad/us."""

    matrix: np.ndarray
    dims: tuple
    field_gauss: float


@dataclass(frozen=True)
class ManifoldHamiltonian:
    """Nuclear-space Hamiltonian conditioned on one electron sublevel."""

    m_s: int
    matrix: np.ndarray
    includes_mediated: bool = False


def central_hamiltonian(cs, field_gauss):
    """H_e = D(Sz^2 - S(S+1)/3) + E(Sx^2 - Sy^2) + gamma_e*B*Sz, rad/us."""
    s = spin_matrices(1.0)
    d = mhz_to_rad_per_us(cs.d)
    e = mhz_to_rad_per_us(cs.e)
    h = (
        d * (s.z @ s.z - (2.0 / 3.0) * s.identity)
        + e * (s.x @ s.x - s.y @ s.y)
        + zeeman_rad_per_us(cs.gamma_e, field_gauss) * s.z
    )
    check_hermitian(h, tol=1.0e-9)
    return h


def nuclear_spin_vector(spin):
    """Stacked (3, dim, dim) array of Ix, Iy, Iz for a spin quantum number."""
    s = spin_matrices(spin)
    return np.stack([s.x, s.y, s.z])


def single_nucleus_terms(nucleus, field_gauss):
    """(zeeman, hyperfine_z_vector, quadrupole) pieces for one nucleus.

    zeeman and quadrupole are (d, d) matrices in rad/us; the hyperfine piece
    is the operator vector sum_a A_za*I_a (rad/us) that multiplies m_s in the
    secular limit.
    """
    iv = nuclear_spin_vector(nucleus.species.spin)
    zeeman = -zeeman_rad_per_us(nucleus.species.gamma, field_gauss) * iv[2]
    a_z = mhz_to_rad_per_us(nucleus.hyperfine[2])  # row (A_zx, A_zy, A_zz)
    hyper_z = np.einsum("a,aij->ij", a_z, iv)
    q = mhz_to_rad_per_us(nucleus.quadrupole)
    quad = np.einsum("ab,aij,bjk->ik", q, iv, iv)
    return zeeman, hyper_z, quad


def nuclear_manifold_hamiltonian(nucleus, m_s, field_gauss):
    """Secular single-nucleus Hamiltonian in the m_s manifold (rad/us).

    H_m = -gamma_n*B*Iz + m_s * sum_a A_za*I_a + I.Q.I; full in the nuclear
    space, secular in the electron spin.
    """
    if m_s not in (-1, 0, 1):
        raise ValueError(f"m_s must be one of -1, 0, +1, got {m_s}")
    zeeman, hyper_z, quad = single_nucleus_terms(nucleus, field_gauss)
    h = zeeman + m_s * hyper_z + quad
    check_hermitian(h, tol=1.0e-9)
    return ManifoldHamiltonian(m_s=m_s, matrix=h)


def auto_pair_couplings(cluster):
    """Dipolar coupling tensors (MHz) for every pair in a cluster."""
    from .bathgen import nuclear_dipolar_coupling

    out = {}
    for i in range(len(cluster)):
        for j in range(i + 1, len(cluster)):
            out[(i, j)] = nuclear_dipolar_coupling(cluster[i], cluster[j])
    return out


def cluster_hamiltonian(cs, cluster, field_gauss, pair_couplings=None):
    """Full Hamiltonian of qubit + cluster nuclei on the product space.

    H = H_e x 1 + sum_i (S.A_i.I_i - gamma_i*B*Iz_i + I_i.Q_i.I_i)
      + sum_{i<j} I_i.J_ij.I_j, with the full (non-secular) hyperfine S.A.I.

    pair_couplings maps (i, j) with i < j (indices into `cluster`) to a 3x3
    dipolar tensor in MHz; by default it is computed from the positions.
    """
    dims = (3,) + tuple(n.species.dim for n in cluster)
    total = int(np.prod(dims))
    if total > DIMENSION_GUARD:
        raise DimensionError(f"product dimension {total} exceeds {DIMENSION_GUARD}")
    if pair_couplings is None:
        pair_couplings = auto_pair_couplings(cluster)

    sv = nuclear_spin_vector(1.0)  # electron S=1 operators
    eye = [np.eye(d, dtype=complex) for d in dims]

    def embed_site(ops, site):
        mats = list(eye)
        mats[site] = ops
        return kron_all(mats)

    h = np.kron(central_hamiltonian(cs, field_gauss), kron_all(eye[1:]))
    ivs = [nuclear_spin_vector(n.species.spin) for n in cluster]
    for i, nucleus in enumerate(cluster):
        zeeman, _, quad = single_nucleus_terms(nucleus, field_gauss)
        h += embed_site(zeeman + quad, i + 1)
        a = mhz_to_rad_per_us(nucleus.hyperfine)
        for ax in range(3):
            for bx in range(3):
                if a[ax, bx] == 0.0:
                    continue
                mats = list(eye)
                mats[0] = sv[ax]
                mats[i + 1] = ivs[i][bx]
                h += a[ax, bx] * kron_all(mats)
    for (i, j), jt in pair_couplings.items():
        jr = mhz_to_rad_per_us(jt)
        for ax in range(3):
            for bx in range(3):
                if jr[ax, bx] == 0.0:
                    continue
                mats = list(eye)
                mats[i + 1] = ivs[i][ax]
                mats[j + 1] = ivs[j][bx]
                h += jr[ax, bx] * kron_all(mats)
    check_hermitian(h, tol=1.0e-9)
    return ClusterHamiltonian(matrix=h, dims=dims, field_gauss=field_gauss)


def _electron_blocks(ch):
    """View the cluster Hamiltonian as 3x3 blocks over the electron index."""
    dn = int(np.prod(ch.dims[1:])) if len(ch.dims) > 1 else 1
    return ch.matrix.reshape(3, dn, 3, dn)


def projected_manifold_hamiltonian(cs, cluster, field_gauss, m_s,
                                   pair_couplings=None, include_mediated=False):
    """Nuclear-space Hamiltonian of a cluster in one electron manifold.

    First order: the diagonal electron block of the full cluster Hamiltonian
    (minus the electron sublevel energy offset).  With include_mediated=True
    the second-order correction sum_{m'!=m} H[m,m'] H[m',m] / (E_m - E_m')
    is added, capturing electron-mediated nuclear-nuclear couplings.
    """
    if m_s not in (-1, 0, 1):
        raise ValueError(f"m_s must be one of -1, 0, +1, got {m_s}")
    ch = cluster_hamiltonian(cs, cluster, field_gauss, pair_couplings)
    blocks = _electron_blocks(ch)
    mi = MS_INDEX[m_s]
    dn = blocks.shape[1]
    h = blocks[mi, :, mi, :] - cs.sublevel_energy(m_s, field_gauss) * np.eye(dn)
    if include_mediated:
        e_m = cs.sublevel_energy(m_s, field_gauss)
        for mp in (-1, 0, 1):
            if mp == m_s:
                continue
            gap = e_m - cs.sublevel_energy(mp, field_gauss)
            if abs(gap) < MEDIATED_GAP_MIN:
                raise DegenerateManifoldError(
                    f"sublevels {m_s} and {mp} separated by {gap:.3g} rad/us; "
                    "use the full-cluster treatment near the anti-crossing"
                )
            mj = MS_INDEX[mp]
            v = blocks[mi, :, mj, :]
            h = h + v @ v.conj().T / gap
    check_hermitian(h, tol=1.0e-9)
    return ManifoldHamiltonian(m_s=m_s, matrix=h, includes_mediated=include_mediated)


def effective_manifold_hamiltonian(cs, cluster, field_gauss, m_s, pair_couplings=None):
    """Second-order effective nuclear Hamiltonian (mediated couplings included)."""
    return projected_manifold_hamiltonian(
        cs, cluster, field_gauss, m_s, pair_couplings, include_mediated=True
    )


def gslac_field(cs, b_min=0.0, b_max=3000.0, n=30001):
    """Field (Gauss) minimizing the gap between the two lowest eigenvalues."""
    fields = np.linspace(b_min, b_max, n)
    gaps = np.empty_like(fields)
    for k, b in enumerate(fields):
        w = np.linalg.eigvalsh(central_hamiltonian(cs, b))
        gaps[k] = w[1] - w[0]
    return float(fields[np.argmin(gaps)])
