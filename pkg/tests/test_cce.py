"""Cluster-correlation-expansion engine tests."""

import numpy as np
import pytest

from hbncce.bathgen import Bath, BathConfig, build_bath, synthetic_spin
from hbncce.cce import (
    Cluster,
    MissingSubclusterError,
    cce_combine,
    coherence_curve,
    enumerate_clusters,
    field_sweep,
    hahn_echo_cluster,
    manifold_echo_cluster,
    naive_hahn_echo,
)
from hbncce.eseem import direct_echo_signal
from hbncce.units import TWO_PI, zeeman_rad_per_us
from conftest import random_bath


def close_spins(n):
    return [
        synthetic_spin(0.5, 8.585, 0.1 * np.eye(3), np.zeros((3, 3)),
                       position=(3.0 + 0.5 * k, 0.0, 0.0))
        for k in range(n)
    ]


def test_enumerate_clusters_combinatorics():
    bath = Bath(close_spins(3))
    clusters = enumerate_clusters(bath, 2, r_dipole=2.0)
    assert sum(c.order == 1 for c in clusters) == 3
    assert sum(c.order == 2 for c in clusters) == 3
    clusters3 = enumerate_clusters(bath, 3, r_dipole=2.0)
    assert sum(c.order == 3 for c in clusters3) == 1
    # spins farther apart than r_dipole form no pairs
    far = Bath([
        synthetic_spin(0.5, 8.585, np.eye(3), np.zeros((3, 3)),
                       position=(3.0, 0.0, 0.0)),
        synthetic_spin(0.5, 8.585, np.eye(3), np.zeros((3, 3)),
                       position=(9.0, 0.0, 0.0)),
    ])
    assert all(c.order == 1 for c in enumerate_clusters(far, 2, r_dipole=2.0))
    with pytest.raises(ValueError):
        enumerate_clusters(bath, 4, r_dipole=2.0)


def test_enumerate_matches_brute_force_recount():
    bath = build_bath(BathConfig(composition="10B14N", bath_radius=10.0,
                                 r_dipole=6.0, seed=1))
    clusters = enumerate_clusters(bath, 2, r_dipole=6.0)
    pairs = {c.indices for c in clusters if c.order == 2}
    recount = set()
    for i in range(len(bath)):
        for j in range(i + 1, len(bath)):
            d = np.linalg.norm(bath[i].position - bath[j].position)
            if d <= 6.0:
                recount.add((i, j))
    assert pairs == recount


def test_echo_kernel_matches_density_matrix_oracle(central_spin):
    rng = np.random.default_rng(21)
    tau = np.linspace(0.0, 1.5, 64)
    for _ in range(4):
        bath = random_bath(rng, int(rng.integers(1, 3)))
        b = float(rng.uniform(300.0, 3000.0))
        if abs(b - 1241.7) < 80.0:
            b += 200.0
        fast = hahn_echo_cluster(central_spin, bath.spins, b, tau,
                                 electron_space="full")
        slow = naive_hahn_echo(central_spin, bath.spins, b, tau)
        assert np.max(np.abs(fast - slow)) < 1e-10


def test_echo_normalization_and_empty_cluster(central_spin):
    tau = np.linspace(0.0, 2.0, 32)
    empty = hahn_echo_cluster(central_spin, [], 700.0, tau)
    assert np.allclose(np.abs(empty), 1.0, atol=1e-9)
    spin = close_spins(1)
    full = hahn_echo_cluster(central_spin, spin, 700.0, tau)
    assert abs(full[0] - 1.0) < 1e-9


def test_secular_half_spin_matches_mims_closed_form(central_spin):
    """Independent two-frequency echo-modulation formula for I=1/2.

    With a hyperfine tensor whose only nonzero row is the z row, the full
    Hamiltonian commutes with Sz, so the kernel must reproduce the textbook
    expression L = 1 - 2k sin^2(w_a tau/2) sin^2(w_b tau/2) built from the
    two manifold Hamiltonians.
    """
    gamma = 8.585
    b = 900.0
    # z-row-only coupling: the only hyperfine terms are Sz*(A_z . I), so the
    # full Hamiltonian commutes with Sz and the secular picture is exact
    a = np.zeros((3, 3))
    a[2] = [1.3, 0.7, 2.1]  # A_zx, A_zy, A_zz in MHz
    spin = synthetic_spin(0.5, gamma, a, np.zeros((3, 3)))
    ma, mb = central_spin.qubit_levels

    def manifold_vec(m_s):
        w = zeeman_rad_per_us(gamma, b)
        az = TWO_PI * a[2]
        return np.array([m_s * az[0], m_s * az[1], m_s * az[2] - w])

    va, vb = manifold_vec(ma), manifold_vec(mb)
    wa, wb = np.linalg.norm(va), np.linalg.norm(vb)
    cos_angle = va @ vb / (wa * wb)
    k = 1.0 - cos_angle**2  # modulation depth: sin^2 of the tilt angle
    tau = np.linspace(0.0, 3.0, 256)
    expected = 1.0 - 2.0 * k * np.sin(wa * tau / 2.0) ** 2 * np.sin(
        wb * tau / 2.0) ** 2
    got = hahn_echo_cluster(central_spin, [spin], b, tau,
                            electron_space="pair")
    assert np.max(np.abs(got.real - expected)) < 1e-6
    assert np.max(np.abs(got.imag)) < 1e-6


def test_gcce1_is_product_of_singles(central_spin):
    rng = np.random.default_rng(3)
    bath = random_bath(rng, 3)
    tau = np.linspace(0.0, 1.0, 48)
    total = coherence_curve(central_spin, bath, 600.0, tau, method="gCCE1")
    product = np.ones(tau.size, dtype=complex)
    for spin in bath.spins:
        product *= hahn_echo_cluster(central_spin, [spin], 600.0, tau)
    assert np.max(np.abs(total.coherence - product)) < 1e-9


def test_gcce2_two_spin_bath_is_exact(central_spin):
    rng = np.random.default_rng(9)
    bath = random_bath(rng, 2)
    tau = np.linspace(0.0, 1.0, 64)
    curve = coherence_curve(central_spin, bath, 800.0, tau, method="gCCE2",
                            r_dipole=20.0, electron_space="full")
    exact = naive_hahn_echo(central_spin, bath.spins, 800.0, tau)
    assert np.max(np.abs(curve.coherence - exact)) < 1e-6


def test_cce_combine_missing_singleton():
    tau = np.zeros(4)
    clusters = [Cluster((0, 1))]
    with pytest.raises(MissingSubclusterError):
        cce_combine(clusters, [np.ones(4, dtype=complex)], tau, 0.0, "gCCE2")


def test_cce_combine_clamps_and_flags():
    tau = np.zeros(3)
    clusters = [Cluster((0,)), Cluster((1,)), Cluster((0, 1))]
    contributions = [
        np.array([1.0, 0.0, 1.0], dtype=complex),  # singleton hits zero
        np.ones(3, dtype=complex),
        np.array([1.0, 0.5, 1.0], dtype=complex),
    ]
    curve = cce_combine(clusters, contributions, tau, 0.0, "gCCE2")
    assert curve.metadata["clamped_divisions"] is True
    # at the clamped point the pair factor is 1, so L = singleton product
    assert curve.coherence[1] == pytest.approx(0.0)


def test_manifold_echo_matches_direct_signal(central_spin):
    rng = np.random.default_rng(31)
    bath = random_bath(rng, 1)
    tau = np.linspace(0.0, 2.0, 128)
    got = manifold_echo_cluster(central_spin, bath.spins, 700.0, tau)
    ref = direct_echo_signal(central_spin, bath[0], 700.0, tau)
    assert np.max(np.abs(got.real - ref)) < 1e-9


def test_thread_count_invariance(central_spin):
    bath = build_bath(BathConfig(composition="11B14N", bath_radius=5.0,
                                 r_dipole=5.0, seed=1, layers=1))
    tau = np.linspace(0.0, 1.0, 32)
    one = coherence_curve(central_spin, bath, 500.0, tau, method="gCCE2",
                          r_dipole=5.0, threads=1)
    four = coherence_curve(central_spin, bath, 500.0, tau, method="gCCE2",
                           r_dipole=5.0, threads=4)
    assert np.array_equal(one.coherence, four.coherence)


def test_hybrid_core_rest_empty_equals_full_order(central_spin):
    bath = build_bath(BathConfig(composition="11B14N", bath_radius=1.6,
                                 r_dipole=1.6, seed=1, layers=1))
    assert len(bath) == 3  # nearest-neighbor nitrogens only
    tau = np.linspace(0.0, 1.0, 64)
    hybrid = coherence_curve(central_spin, bath, 800.0, tau,
                             method="hybrid_core", r_dipole=1.6)
    gcce3 = coherence_curve(central_spin, bath, 800.0, tau, method="gCCE3",
                            r_dipole=5.0)
    assert np.max(np.abs(hybrid.coherence - gcce3.coherence)) < 1e-6


def test_field_sweep_semantics(central_spin):
    rng = np.random.default_rng(17)
    bath = random_bath(rng, 2)
    tau = np.linspace(0.0, 0.5, 16)
    single = field_sweep(central_spin, bath, [700.0], tau, method="gCCE2",
                         r_dipole=20.0)
    assert len(single.curves) == 1
    direct = coherence_curve(central_spin, bath, 700.0, tau, method="gCCE2",
                             r_dipole=20.0)
    assert np.array_equal(single.curves[0].coherence, direct.coherence)
    with pytest.raises(ValueError):
        field_sweep(central_spin, bath, [700.0, 600.0], tau)
    with pytest.raises(ValueError):
        field_sweep(central_spin, bath, [], tau)


def test_unknown_method_rejected(central_spin):
    rng = np.random.default_rng(1)
    bath = random_bath(rng, 1)
    with pytest.raises(ValueError):
        coherence_curve(central_spin, bath, 500.0, np.linspace(0, 1, 8),
                        method="gCCE9")
