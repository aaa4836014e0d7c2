"""Nuclear-spin bath construction for a boron-vacancy defect in h-BN.

Builds the multi-layer AA'-stacked lattice around the vacancy, assigns
isotopes, ingests externally computed hyperfine/quadrupole tensors from a
plain-text table, and falls back to point-dipole hyperfine couplings for
distant spins.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .units import GAMMA_E, dipolar_prefactor_mhz_ang3

# Standard h-BN crystallography: in-plane lattice constant and interlayer
# spacing (AA' stacking, B over N).
LATTICE_A = 2.504
INTERLAYER = 3.33
BOND = LATTICE_A / np.sqrt(3.0)

SHELL_TOL = 1.0e-3
TENSOR_MATCH_TOL = 0.3


class CompositionError(ValueError):
    """Unknown species label or incomplete composition."""


class TensorTableError(ValueError):
    """Malformed tensor-table row or ambiguous site match."""


@dataclass(frozen=True)
class SpinSpecies:
    """Isotope identity: spin quantum number, gyromagnetic ratio, abundance.

    gamma is in rad G^-1 ms^-1.  quad_scale is proportional to the electric
    quadrupole moment divided by I(2I-1); it converts a quadrupole tensor
    tabulated for the reference isotope of the element into one for this
    isotope.  q_default is the axial Q_zz (MHz) of the traceless bulk-like
    quadrupole tensor used when a site has no tabulated tensor.
    """

    name: str
    spin: float
    gamma: float
    abundance: float
    quad_scale: float = 0.0
    q_default: float = 0.0

    @property
    def dim(self):
        return int(round(2.0 * self.spin)) + 1


SPECIES = {
    "B10": SpinSpecies("B10", 3.0, 2.875, 0.199, quad_scale=8.459 / 15.0, q_default=0.204),
    "B11": SpinSpecies("B11", 1.5, 8.585, 0.801, quad_scale=4.059 / 3.0, q_default=0.489),
    "N14": SpinSpecies("N14", 1.0, 1.9338, 0.996, quad_scale=2.044 / 1.0, q_default=0.070),
    "N15": SpinSpecies("N15", 0.5, -2.7126, 0.004, quad_scale=0.0, q_default=0.0),
}

#: Isotope whose tensors the table is tabulated for, per sublattice.
REFERENCE_ISOTOPE = {"B": "B11", "N": "N14"}

NATURAL_COMPOSITION = {
    "B": {"B10": SPECIES["B10"].abundance, "B11": SPECIES["B11"].abundance},
    "N": {"N14": SPECIES["N14"].abundance, "N15": SPECIES["N15"].abundance},
}


@dataclass(frozen=True)
class LatticeSite:
    position: np.ndarray  # 3-vector, Angstrom; defect at origin, c-axis = z
    sublattice: str  # "B" or "N"
    layer_index: int
    shell_index: int  # 1-based, ranked by distance from the vacancy


@dataclass(frozen=True)
class BathSpin:
    site: LatticeSite
    species: SpinSpecies
    hyperfine: np.ndarray = None  # 3x3, MHz
    quadrupole: np.ndarray = None  # 3x3, MHz, traceless
    a_source: str = "point_dipole"  # or "dft_table"

    @property
    def position(self):
        return self.site.position


@dataclass(frozen=True)
class BathConfig:
    composition: object = "natural"  # label or {sublattice: species or probs}
    bath_radius: float = 18.0
    r_dipole: float = 8.0
    seed: int = 0
    dft_table_path: str = None
    layers: int = None

    def __post_init__(self):
        if self.bath_radius <= 0:
            raise ValueError("bath_radius must be positive")
        if self.r_dipole > self.bath_radius:
            raise ValueError("r_dipole must not exceed bath_radius")


@dataclass
class Bath:
    """Immutable bath: a list of fully specified spins plus array views."""

    spins: list

    positions: np.ndarray = field(init=False)
    gammas: np.ndarray = field(init=False)
    dims: np.ndarray = field(init=False)

    def __post_init__(self):
        n = len(self.spins)
        self.positions = np.array([s.position for s in self.spins]).reshape(n, 3)
        self.gammas = np.array([s.species.gamma for s in self.spins])
        self.dims = np.array([s.species.dim for s in self.spins], dtype=int)

    def __len__(self):
        return len(self.spins)

    def __getitem__(self, i):
        return self.spins[i]

    def subset(self, indices):
        return Bath([self.spins[i] for i in indices])


def _honeycomb_layer(radius, z, flip):
    """B and N in-plane positions of one layer within `radius` of the origin.

    flip=True swaps the sublattice decoration (AA' stacking: adjacent layers
    have N over B and B over N).
    """
    a1 = np.array([LATTICE_A, 0.0])
    a2 = np.array([0.5 * LATTICE_A, 0.5 * np.sqrt(3.0) * LATTICE_A])
    delta = np.array([0.0, BOND])
    nmax = int(np.ceil(radius / LATTICE_A)) + 2
    sites = []
    for n1 in range(-nmax, nmax + 1):
        for n2 in range(-nmax, nmax + 1):
            base = n1 * a1 + n2 * a2
            for offset, sub in ((np.zeros(2), "B"), (delta, "N")):
                xy = base + offset
                if flip:
                    sub = "N" if sub == "B" else "B"
                pos = np.array([xy[0], xy[1], z])
                if np.linalg.norm(pos) <= radius:
                    sites.append((pos, sub))
    return sites


def build_lattice(bath_radius, layers=None):
    """All B and N sites within bath_radius of the vacancy, shells indexed.

    The vacancy sits at the origin of a boron site in layer 0 and is
    excluded.  `layers` is the total number of layers (odd, centered on the
    defect layer); by default enough layers to fill the radius are used.
    """
    if bath_radius <= 0:
        raise ValueError("bath_radius must be positive")
    if layers is None:
        half = int(np.floor(bath_radius / INTERLAYER))
    else:
        if layers < 1:
            raise ValueError("layers must be >= 1")
        half = (layers - 1) // 2
    raw = []
    for k in range(-half, half + 1):
        z = k * INTERLAYER
        if abs(z) > bath_radius:
            continue
        for pos, sub in _honeycomb_layer(bath_radius, z, flip=(k % 2 != 0)):
            if np.linalg.norm(pos) < 1.0e-9:
                continue  # the vacancy itself
            raw.append((pos, sub, k))

    dists = np.array([np.linalg.norm(p) for p, _, _ in raw])
    order = np.lexsort(
        (
            [p[2] for p, _, _ in raw],
            [p[1] for p, _, _ in raw],
            [p[0] for p, _, _ in raw],
            dists,
        )
    )
    sites = []
    shell = 0
    prev_d = -np.inf
    for idx in order:
        d = dists[idx]
        if d - prev_d > SHELL_TOL:
            shell += 1
            prev_d = d
        pos, sub, k = raw[idx]
        sites.append(
            LatticeSite(position=pos, sublattice=sub, layer_index=k, shell_index=shell)
        )
    return sites


def shell_distances(sites):
    """Map shell_index -> distance (Angstrom) for a generated lattice."""
    out = {}
    for s in sites:
        out.setdefault(s.shell_index, float(np.linalg.norm(s.position)))
    return out


def resolve_composition(composition):
    """Normalize a composition spec to {sublattice: {species_name: prob}}.

    Accepts labels like "10B14N", "11B15N", "natural", or an explicit map
    from sublattice to a species name or a species->probability dict.
    """
    if isinstance(composition, str):
        label = composition.strip()
        if label.lower() in ("natural", "nat"):
            return {k: dict(v) for k, v in NATURAL_COMPOSITION.items()}
        comp = {}
        for sub, prefix in (("B", "B"), ("N", "N")):
            for name in SPECIES:
                mass = name[1:]
                if name.startswith(prefix) and (mass + prefix) in label:
                    comp[sub] = {name: 1.0}
        if set(comp) != {"B", "N"}:
            raise CompositionError(f"unrecognized composition label {label!r}")
        return comp
    comp = {}
    for sub in ("B", "N"):
        if sub not in composition:
            raise CompositionError(f"composition missing sublattice {sub!r}")
        entry = composition[sub]
        if isinstance(entry, str):
            entry = {entry: 1.0}
        for name in entry:
            if name not in SPECIES:
                raise CompositionError(f"unknown species label {name!r}")
        total = sum(entry.values())
        if not np.isclose(total, 1.0, atol=1.0e-9):
            raise CompositionError(f"probabilities for {sub!r} sum to {total}")
        comp[sub] = dict(entry)
    return comp


def _site_uniform(seed, index):
    """One uniform deviate keyed by (seed, site index), order-independent."""
    bits = np.random.Philox(key=np.uint64(seed), counter=[0, 0, 0, index])
    return np.random.Generator(bits).random()


def assign_isotopes(sites, composition, seed):
    """Assign an isotope to every site; deterministic in (sites, comp, seed)."""
    comp = resolve_composition(composition)
    spins = []
    for index, site in enumerate(sites):
        probs = comp[site.sublattice]
        names = sorted(probs)
        if len(names) == 1:
            chosen = names[0]
        else:
            u = _site_uniform(seed, index)
            acc = 0.0
            chosen = names[-1]
            for name in names:
                acc += probs[name]
                if u < acc:
                    chosen = name
                    break
        spins.append(BathSpin(site=site, species=SPECIES[chosen]))
    return spins


def point_dipole_hyperfine(position, gamma_n):
    """Point-dipole hyperfine tensor (MHz) for a nucleus at `position`.

    A_ab = prefactor * (3 r_a r_b - delta_ab r^2) / r^5, symmetric traceless.
    """
    r = np.asarray(position, dtype=float)
    rn = np.linalg.norm(r)
    if rn <= 0.5:
        raise ValueError(f"position too close to the defect: |r| = {rn:.3f} A")
    pref = dipolar_prefactor_mhz_ang3(GAMMA_E, gamma_n)
    return pref * (3.0 * np.outer(r, r) - np.eye(3) * rn**2) / rn**5


def nuclear_dipolar_coupling(spin_i, spin_j):
    """Dipolar coupling tensor J (MHz) between two bath nuclei."""
    r = np.asarray(spin_j.position, dtype=float) - np.asarray(spin_i.position, dtype=float)
    rn = np.linalg.norm(r)
    if rn <= 0.3:
        raise ValueError(f"coincident nuclei: |r_i - r_j| = {rn:.3f} A")
    pref = dipolar_prefactor_mhz_ang3(spin_i.species.gamma, spin_j.species.gamma)
    return pref * (3.0 * np.outer(r, r) - np.eye(3) * rn**2) / rn**5


def default_quadrupole(species):
    """Axial traceless quadrupole tensor (MHz) for a bulk-like site."""
    q = species.q_default
    return np.diag([-0.5 * q, -0.5 * q, q])


@dataclass(frozen=True)
class TensorRow:
    species: str
    position: np.ndarray
    hyperfine: np.ndarray
    quadrupole: np.ndarray
    line: int


def load_dft_tensors(path):
    """Parse a tensor table: `species x y z A(9) Q(9)` per row, '#' comments."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 22:
                raise TensorTableError(
                    f"{path}:{lineno}: expected 22 fields, got {len(parts)}"
                )
            name = parts[0]
            if name not in SPECIES:
                raise TensorTableError(f"{path}:{lineno}: unknown species {name!r}")
            try:
                vals = np.array([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise TensorTableError(f"{path}:{lineno}: {exc}") from exc
            rows.append(
                TensorRow(
                    species=name,
                    position=vals[:3],
                    hyperfine=vals[3:12].reshape(3, 3),
                    quadrupole=vals[12:21].reshape(3, 3),
                    line=lineno,
                )
            )
    return rows


def attach_tensors(spins, table_rows, match_tol=TENSOR_MATCH_TOL):
    """Attach hyperfine/quadrupole tensors to bath spins.

    Table rows are matched to sites by nearest position within match_tol;
    tensors are rescaled from the tabulated reference isotope to the
    assigned isotope (hyperfine by the gamma ratio, quadrupole by the
    moment-based quad_scale ratio).  Spins with no matching row get a
    point-dipole hyperfine tensor and the species-default quadrupole.

    Returns (spins_with_tensors, unmatched_rows).
    """
    positions = np.array([s.position for s in spins]).reshape(len(spins), 3)
    matched = {}
    unmatched = []
    for row in table_rows:
        if len(spins) == 0:
            unmatched.append(row)
            continue
        d = np.linalg.norm(positions - row.position[None, :], axis=1)
        best = int(np.argmin(d))
        if d[best] > match_tol:
            unmatched.append(row)
            continue
        if best in matched:
            raise TensorTableError(
                f"rows {matched[best].line} and {row.line} both match site "
                f"at {positions[best]}"
            )
        matched[best] = row
    out = []
    for i, spin in enumerate(spins):
        species = spin.species
        if i in matched:
            row = matched[i]
            ref = SPECIES[row.species]
            if ref.name[0] != species.name[0]:
                raise TensorTableError(
                    f"row {row.line}: element {row.species} does not match "
                    f"site sublattice {spin.site.sublattice}"
                )
            a = row.hyperfine * (species.gamma / ref.gamma)
            if ref.quad_scale > 0 and species.quad_scale > 0:
                q = row.quadrupole * (species.quad_scale / ref.quad_scale)
            elif species.quad_scale > 0:
                q = row.quadrupole
            else:
                q = np.zeros((3, 3))
            out.append(
                replace(spin, hyperfine=a, quadrupole=q, a_source="dft_table")
            )
        else:
            a = point_dipole_hyperfine(spin.position, species.gamma)
            q = default_quadrupole(species) if species.spin >= 1.0 else np.zeros((3, 3))
            out.append(replace(spin, hyperfine=a, quadrupole=q, a_source="point_dipole"))
    return out, unmatched


def build_bath(config):
    """Full pipeline: lattice -> isotopes -> tensors, per a BathConfig."""
    sites = build_lattice(config.bath_radius, layers=config.layers)
    spins = assign_isotopes(sites, config.composition, config.seed)
    if config.dft_table_path is not None:
        rows = load_dft_tensors(config.dft_table_path)
    else:
        rows = default_tensor_table()
    spins, _ = attach_tensors(spins, rows)
    return Bath(spins)


def synthetic_spin(spin, gamma, hyperfine, quadrupole, position=(0.0, 0.0, 10.0),
                   name="custom"):
    """A standalone BathSpin with explicit tensors, for analysis and tests."""
    species = SpinSpecies(name=name, spin=spin, gamma=gamma, abundance=1.0)
    site = LatticeSite(
        position=np.asarray(position, dtype=float),
        sublattice="N",
        layer_index=0,
        shell_index=0,
    )
    return BathSpin(
        site=site,
        species=species,
        hyperfine=np.asarray(hyperfine, dtype=float),
        quadrupole=np.asarray(quadrupole, dtype=float),
        a_source="dft_table",
    )


def default_tensor_table():
    """Rows of the tensor table shipped with the package."""
    from importlib.resources import files

    path = files("hbncce.data").joinpath("hbn_vacancy_tensors.txt")
    with open(str(path)) as _:
        pass
    return load_dft_tensors(str(path))
