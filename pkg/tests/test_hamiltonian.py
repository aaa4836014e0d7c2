"""Hamiltonian assembly tests."""

import numpy as np
import pytest

from hbncce.bathgen import synthetic_spin
from hbncce.hamiltonian import (
    CentralSpin,
    DegenerateManifoldError,
    DimensionError,
    central_hamiltonian,
    cluster_hamiltonian,
    effective_manifold_hamiltonian,
    gslac_field,
    nuclear_manifold_hamiltonian,
    projected_manifold_hamiltonian,
)
from hbncce.spinops import check_hermitian, spin_matrices
from hbncce.units import mhz_to_rad_per_us, rad_per_us_to_mhz, zeeman_rad_per_us
from conftest import random_bath


def test_central_zero_field_spectrum(central_spin):
    h = central_hamiltonian(central_spin, 0.0)
    w = rad_per_us_to_mhz(np.linalg.eigvalsh(h))
    # m=0 sits 2D/3 below the centroid; the +-1 pair is split by 2E
    assert w[0] == pytest.approx(-2.0 * 3480.0 / 3.0, abs=1e-6)
    assert w[2] - w[1] == pytest.approx(2.0 * 50.0, abs=1e-6)


def test_invalid_qubit_levels():
    with pytest.raises(ValueError):
        CentralSpin(qubit_levels=(0, 0))
    with pytest.raises(ValueError):
        CentralSpin(qubit_levels=(0, 2))


def test_gslac_field(central_spin):
    assert abs(gslac_field(central_spin) - 1240.0) <= 10.0


def test_nuclear_manifold_hand_built():
    a = np.diag([1.0, 2.0, 3.0])  # MHz
    spin = synthetic_spin(0.5, 8.585, a, np.zeros((3, 3)))
    h = nuclear_manifold_hamiltonian(spin, 1, 1000.0).matrix
    s = spin_matrices(0.5)
    expected = (
        -zeeman_rad_per_us(8.585, 1000.0) * s.z + mhz_to_rad_per_us(3.0) * s.z
    )
    assert np.allclose(h, expected, atol=1e-12)
    with pytest.raises(ValueError):
        nuclear_manifold_hamiltonian(spin, 2, 1000.0)


def test_cluster_hamiltonian_hermitian_random(central_spin):
    rng = np.random.default_rng(5)
    for _ in range(5):
        bath = random_bath(rng, 2)
        ch = cluster_hamiltonian(central_spin, bath.spins, 750.0)
        check_hermitian(ch.matrix, tol=1e-9)
        assert ch.matrix.shape[0] == int(np.prod(ch.dims))


def test_cluster_decoupled_is_kronecker_sum(central_spin):
    spin = synthetic_spin(1.0, 1.9338, np.zeros((3, 3)), np.zeros((3, 3)))
    ch = cluster_hamiltonian(central_spin, [spin], 500.0, pair_couplings={})
    he = central_hamiltonian(central_spin, 500.0)
    hn = nuclear_manifold_hamiltonian(spin, 0, 500.0).matrix
    expected = np.kron(he, np.eye(3)) + np.kron(np.eye(3), hn)
    assert np.allclose(ch.matrix, expected, atol=1e-12)


def test_minimal_four_spin_dimension(central_spin):
    spins = [
        synthetic_spin(1.0, 1.9338, np.eye(3), np.zeros((3, 3)),
                       position=(1.4, 0.5 * k, 0.0))
        for k in range(3)
    ]
    ch = cluster_hamiltonian(central_spin, spins, 500.0)
    assert ch.matrix.shape == (81, 81)


def test_dimension_guard(central_spin):
    spins = [
        synthetic_spin(3.0, 2.875, np.eye(3), np.zeros((3, 3)),
                       position=(2.0 + k, 0.0, 0.0))
        for k in range(5)
    ]
    with pytest.raises(DimensionError):
        cluster_hamiltonian(central_spin, spins, 500.0)


def test_mediated_trivial_without_hyperfine(central_spin):
    spin = synthetic_spin(1.5, 8.585, np.zeros((3, 3)),
                          np.diag([-0.2, -0.2, 0.4]))
    plain = projected_manifold_hamiltonian(central_spin, [spin], 800.0, 1, {})
    mediated = effective_manifold_hamiltonian(central_spin, [spin], 800.0, 1, {})
    assert mediated.includes_mediated
    # with A = 0 the only electron-off-diagonal block is the transverse
    # zero-field-splitting term, whose second-order piece is a constant
    # identity shift: no nuclear-nuclear coupling is generated
    diff = mediated.matrix - plain.matrix
    shift = np.trace(diff) / diff.shape[0]
    assert np.allclose(diff, shift * np.eye(diff.shape[0]), atol=1e-10)


def test_mediated_second_order_scaling(central_spin):
    a = np.array([[3.0, 0.5, 1.0], [0.5, 2.0, 0.2], [1.0, 0.2, 4.0]])
    def correction(scale):
        s1 = synthetic_spin(0.5, 8.585, scale * a, np.zeros((3, 3)),
                            position=(2.0, 0.0, 0.0))
        s2 = synthetic_spin(0.5, 8.585, scale * a, np.zeros((3, 3)),
                            position=(0.0, 2.0, 0.0))
        plain = projected_manifold_hamiltonian(
            central_spin, [s1, s2], 500.0, 1, {})
        med = effective_manifold_hamiltonian(
            central_spin, [s1, s2], 500.0, 1, {})
        diff = med.matrix - plain.matrix
        # drop the hyperfine-independent identity shift contributed by the
        # transverse zero-field-splitting term
        return diff - np.trace(diff) / diff.shape[0] * np.eye(diff.shape[0])

    full = correction(1.0)
    half = correction(0.5)
    assert np.allclose(half, full / 4.0, atol=1e-10 * np.max(np.abs(full)))


def test_mediated_degenerate_near_anticrossing(central_spin):
    spin = synthetic_spin(1.0, 1.9338, np.eye(3), np.zeros((3, 3)))
    # field where the diagonal m_s = 0 and -1 energies cross exactly
    b = mhz_to_rad_per_us(central_spin.d) / (central_spin.gamma_e * 1e-3)
    with pytest.raises(DegenerateManifoldError):
        effective_manifold_hamiltonian(central_spin, [spin], b, 0, {})
