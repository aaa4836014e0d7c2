"""Shared fixtures and synthetic-bath helpers."""

import numpy as np
import pytest

from hbncce.bathgen import SPECIES, Bath, synthetic_spin

#: Species by nuclear spin quantum number, for parametrized sweeps.
ALL_SPECIES = ("N15", "N14", "B11", "B10")


def random_symmetric(rng, scale):
    m = rng.normal(scale=scale, size=(3, 3))
    return 0.5 * (m + m.T)


def random_traceless_symmetric(rng, scale):
    m = random_symmetric(rng, scale)
    return m - np.eye(3) * np.trace(m) / 3.0


def random_synthetic_spin(rng, name, position, a_scale=5.0, q_scale=0.4):
    """A bath spin of the given species with random symmetric tensors."""
    species = SPECIES[name]
    hyperfine = random_symmetric(rng, a_scale)
    if species.spin > 0.5:
        quadrupole = random_traceless_symmetric(rng, q_scale)
    else:
        quadrupole = np.zeros((3, 3))
    return synthetic_spin(species.spin, species.gamma, hyperfine, quadrupole,
                          position=position, name=name)


def random_bath(rng, n_spins, dim_budget=40):
    """A Bath of n_spins random synthetic nuclei within a few Angstrom."""
    spins = []
    dim_product = 1
    while len(spins) < n_spins:
        name = ALL_SPECIES[rng.integers(len(ALL_SPECIES))]
        dim = SPECIES[name].dim
        # reserve room (dim >= 2) for each slot still to fill
        remaining = n_spins - len(spins) - 1
        if dim_product * dim * 2**remaining > dim_budget:
            continue
        position = rng.uniform(-3.0, 3.0, size=3) + np.array([4.0, 0.0, 0.0])
        if any(np.linalg.norm(position - s.position) < 0.8 for s in spins):
            continue
        spins.append(random_synthetic_spin(rng, name, position))
        dim_product *= dim
    return Bath(spins)


@pytest.fixture(scope="session")
def central_spin():
    from hbncce.hamiltonian import CentralSpin

    return CentralSpin()
