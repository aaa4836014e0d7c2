#!/usr/bin/env python3
"""Generate the shipped hyperfine/quadrupole tensor table.

Writes src/hbncce/data/hbn_vacancy_tensors.txt: one row per nucleus near
the vacancy, tensors in MHz for the reference isotopes (11B, 14N).  Values
are anchored to the documented near-defect couplings (first-shell A_zz =
47.6 MHz, sixth-shell Fermi contact 5.21 MHz / A_zz = 4.3706 MHz) and to
the level-cancellation fields of the second boron shell; remaining shells
carry point-dipole-scale couplings with modest anisotropies.

Tensors are built in a local frame (x' radial, y' tangential, z along c)
and rotated into the global frame per site, so every in-plane site keeps
its radial mirror symmetry (no xz/yz mixing).
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hbncce import bathgen  # noqa: E402
from hbncce.units import GAMMA_E, dipolar_prefactor_mhz_ang3  # noqa: E402

OUT = Path(__file__).resolve().parents[1] / "src/hbncce/data/hbn_vacancy_tensors.txt"

# Local-frame shell parameters, keyed by (shell_index).  Each entry:
#   species: reference isotope of the element occupying the shell
#   a_local: (A_x'x', A_y'y', A_zz) hyperfine principal values, MHz
#   q_local: (Q_x'x', Q_y'y', Q_zz) quadrupole principal values, MHz
# Shell indices follow distance ranking of the ideal lattice; the in-plane
# shells within 5.5 A are tabulated, interlayer shells are left to the
# point-dipole fallback.
FIRST_SHELL_A_PERP = 82.8  # tuned: second-order shift puts the dominant
# echo-modulation line at 46.7 MHz, nearly field-independent up to ~1 kG
SHELLS = {
    # First-shell Q_zz kept small enough that the m_s=+1 flip-flip channel
    # (N down, B down) stays detuned from the 3 T Zeeman sum; the dominant
    # double-quantum line is independent of Q_zz.
    1: dict(species="N14",
            a_local=(FIRST_SHELL_A_PERP, FIRST_SHELL_A_PERP, 47.6),
            q_local=(-0.13, -0.37, 0.50)),
    2: dict(species="B11",
            a_local=(3.1, 2.2, 1.40),
            q_local=(0.33, -0.87, 0.54)),
    3: dict(species="N14",
            a_local=(1.9, 1.1, -0.42),
            q_local=(0.16, -0.26, 0.10)),
    6: dict(species="N14",
            a_local=(5.6447, 5.6447, 4.3706),
            q_local=(0.12, -0.19, 0.07)),
    8: dict(species="B11",
            a_local=(0.9, 0.5, -0.36),
            q_local=(-0.06, -0.56, 0.62)),
    10: dict(species="B11",
             a_local=(0.45, 0.22, -0.21),
             q_local=(-0.12, -0.52, 0.64)),
    12: dict(species="N14",
             a_local=(0.55, 0.30, -0.16),
             q_local=(0.14, -0.22, 0.08)),
}


def rot_z(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def main():
    sites = bathgen.build_lattice(5.6)
    rows = []
    for site in sites:
        params = SHELLS.get(site.shell_index)
        if params is None:
            continue
        theta = np.arctan2(site.position[1], site.position[0])
        r = rot_z(theta)
        a = r @ np.diag(params["a_local"]) @ r.T
        q = r @ np.diag(params["q_local"]) @ r.T
        rows.append((params["species"], site.position, a, q))

    lines = [
        "# Hyperfine (A) and quadrupole (Q) tensors near the boron vacancy.",
        "# Columns: species x y z Axx Axy Axz Ayx Ayy Ayz Azx Azy Azz"
        " Qxx Qxy Qxz Qyx Qyy Qyz Qzx Qzy Qzz",
        "# Positions in Angstrom (vacancy at origin, c-axis = z);"
        " tensors in MHz for the reference isotopes 11B / 14N.",
    ]
    for species, pos, a, q in rows:
        nums = list(pos) + list(a.ravel()) + list(q.ravel())
        lines.append(species + " " + " ".join(f"{v: .6f}" for v in nums))
    OUT.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(rows)} rows to {OUT}")


if __name__ == "__main__":
    main()
