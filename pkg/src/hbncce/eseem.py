"""Analytic echo-modulation machinery.

Per-nucleus decomposition of the Hahn-echo signal into an unmodulated part
and single-manifold / combination modulation terms, analytic modulation
frequencies, level-mixing (cancellation-condition) analysis, the
decoherence-transition boundary, and discrete Fourier frequency extraction.

Frequency conventions: eigenvalue-difference ("manifold gap") frequencies
are conjugate to the pulse spacing tau; an echo curve is physically sampled
on t = 2*tau, so a gap g shows up in the Fourier transform of the curve at
g/2.  dominant_frequency works on the t axis.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .hamiltonian import CentralSpin, nuclear_manifold_hamiltonian, \
    projected_manifold_hamiltonian
from .spinops import eig_hermitian
from .units import TWO_PI, rad_per_us_to_mhz, zeeman_rad_per_us

#: Exclusion half-width (Gauss) around the anti-crossing where the secular
#: manifold picture is invalid.
SECULAR_WINDOW = 50.0

#: Level splittings below this (MHz) count as degenerate in ratio analysis.
DEGENERACY_FLOOR = 1.0e-6

#: Default frequency threshold (MHz) separating "unmodulated" from
#: modulated terms when no tau grid defines an observation window.
DEFAULT_V0_THRESHOLD = 0.05


class SecularInvalidError(ValueError):
    """Field too close to the anti-crossing for the secular decomposition."""


class BoundaryRangeError(ValueError):
    """The field grid does not bracket the transition boundary."""


@dataclass
class EseemTerms:
    """Decomposition of a single-nucleus echo signal on a tau grid.

    v0 is the time-constant part; v_alpha/v_beta collect terms modulated
    only by one manifold's gap frequencies; v_plus/v_minus collect
    sum/difference combination terms.  transition_matrix is the overlap of
    the two manifold eigenbases; frequencies are tau-conjugate gaps in MHz.
    """

    nucleus_id: int
    v0: float
    v_alpha: np.ndarray
    v_beta: np.ndarray
    v_plus: np.ndarray
    v_minus: np.ndarray
    transition_matrix: np.ndarray
    frequencies_alpha: np.ndarray
    frequencies_beta: np.ndarray

    def total(self):
        """V0 + all modulated terms: the echo signal itself."""
        return self.v0 + self.v_alpha + self.v_beta + self.v_plus + self.v_minus


@dataclass(frozen=True)
class MixingChannel:
    """One nuclear level pair's splitting and coupling in one manifold."""

    nucleus_id: int
    m_s: int
    levels: tuple  # (m_i, m_j) Iz labels
    kind: str  # "single_quantum" or "double_quantum"
    delta_mhz: float
    omega_mhz: float

    @property
    def ratio(self):
        if self.delta_mhz < DEGENERACY_FLOOR:
            return np.inf
        return self.omega_mhz / self.delta_mhz


@dataclass
class TbReport:
    """Transition-boundary / unmodulated-product analysis over a field grid."""

    composition: str
    b_grid: np.ndarray
    max_ratio: np.ndarray = None
    tb_gauss: float = None
    v0_product: np.ndarray = None
    v0_intercept_gauss: float = None


def _check_secular(cs, field_gauss):
    from .cce import _gslac_field_estimate

    if abs(field_gauss - _gslac_field_estimate(cs)) < SECULAR_WINDOW:
        raise SecularInvalidError(
            f"B = {field_gauss} G is within {SECULAR_WINDOW} G of the "
            "anti-crossing; the secular manifold picture does not apply"
        )


def _manifold_pair(cs, nucleus, field_gauss, include_mediated):
    ma, mb = cs.qubit_levels
    if include_mediated:
        ha = projected_manifold_hamiltonian(cs, [nucleus], field_gauss, ma,
                                            {}, include_mediated=True)
        hb = projected_manifold_hamiltonian(cs, [nucleus], field_gauss, mb,
                                            {}, include_mediated=True)
        return ha.matrix, hb.matrix
    ha = nuclear_manifold_hamiltonian(nucleus, ma, field_gauss)
    hb = nuclear_manifold_hamiltonian(nucleus, mb, field_gauss)
    return ha.matrix, hb.matrix


def eseem_decompose(cs, nucleus, field_gauss, tau_grid, nucleus_id=0,
                    include_mediated=False, degeneracy_tol=1.0e-9):
    """Decompose one nucleus's echo signal into V0 and modulation terms.

    The echo signal L(2tau) = (1/d) Tr[U_b^dag U_a^dag U_b U_a] expands into
    a quadruple sum over the eigenpairs of the two manifold Hamiltonians;
    each term carries a phase (gap_a + gap_b)*tau and is classified by which
    gaps vanish (within degeneracy_tol, in MHz).  Every term keeps its exact
    phase, so summing the five pieces reproduces the direct signal pointwise;
    for the coarser "unmodulated within an observation window" notion used in
    field-sweep products see unmodulated_fraction.
    """
    _check_secular(cs, field_gauss)
    tau_grid = np.asarray(tau_grid, dtype=float)
    threshold = degeneracy_tol

    h_a, h_b = _manifold_pair(cs, nucleus, field_gauss, include_mediated)
    ea = eig_hermitian(h_a)
    eb = eig_hermitian(h_b)
    m = ea.vectors.conj().T @ eb.vectors
    d = m.shape[0]
    wa = ea.values
    wb = eb.values

    # Term amplitude C[i,j,k,l] = M_ij M*_kj M_kl M*_il with tau phase
    # (wa_k - wa_i) + (wb_j - wb_l); see the trace expansion in the basis
    # of the alpha-manifold eigenvectors.
    c = np.einsum("ij,kj,kl,il->ijkl", m, m.conj(), m, m.conj())
    gap_a = rad_per_us_to_mhz(wa[None, None, :, None] - wa[:, None, None, None])
    gap_b = rad_per_us_to_mhz(wb[None, :, None, None] - wb[None, None, None, :])

    zero_a = np.abs(gap_a) < threshold
    zero_b = np.abs(gap_b) < threshold
    masks = {
        "v0": zero_a & zero_b,
        "v_alpha": ~zero_a & zero_b,
        "v_beta": zero_a & ~zero_b,
        "v_plus": (~zero_a & ~zero_b) & (gap_a * gap_b > 0),
        "v_minus": (~zero_a & ~zero_b) & (gap_a * gap_b <= 0),
    }
    phase = TWO_PI * (gap_a + gap_b)  # rad/us
    series = {}
    for name, mask in masks.items():
        amp = np.where(mask, c, 0.0)
        if name == "v0":
            series[name] = float(np.real(np.sum(amp))) / d
        else:
            series[name] = (
                np.real(
                    np.einsum(
                        "ijkl,tijkl->t",
                        amp,
                        np.exp(1j * np.multiply.outer(tau_grid, phase)),
                    )
                )
                / d
            )

    fa = np.abs(gap_a[~zero_a])
    fb = np.abs(gap_b[~zero_b])
    return EseemTerms(
        nucleus_id=nucleus_id,
        v0=series["v0"],
        v_alpha=series["v_alpha"],
        v_beta=series["v_beta"],
        v_plus=series["v_plus"],
        v_minus=series["v_minus"],
        transition_matrix=m,
        frequencies_alpha=np.unique(np.round(fa, 9)),
        frequencies_beta=np.unique(np.round(fb, 9)),
    )


def direct_echo_signal(cs, nucleus, field_gauss, tau_grid,
                       include_mediated=False):
    """Reference single-nucleus echo by direct two-manifold propagation.

    L(2tau) = (1/d) Re Tr[U_b^dag U_a^dag U_b U_a]; the oracle the
    decomposition must reproduce pointwise.
    """
    _check_secular(cs, field_gauss)
    tau_grid = np.asarray(tau_grid, dtype=float)
    h_a, h_b = _manifold_pair(cs, nucleus, field_gauss, include_mediated)
    d = h_a.shape[0]
    ea = eig_hermitian(h_a)
    eb = eig_hermitian(h_b)
    out = np.empty(tau_grid.size)
    for t, tau in enumerate(tau_grid):
        ua = (ea.vectors * np.exp(-1j * ea.values * tau)) @ ea.vectors.conj().T
        ub = (eb.vectors * np.exp(-1j * eb.values * tau)) @ eb.vectors.conj().T
        out[t] = np.real(np.trace(ub.conj().T @ ua.conj().T @ ub @ ua)) / d
    return out


def unmodulated_fraction(cs, nucleus, field_gauss, threshold=DEFAULT_V0_THRESHOLD,
                         include_mediated=False):
    """The time-constant part V0 of one nucleus's echo signal.

    Terms whose total gap frequency is below `threshold` (MHz) count as
    unmodulated.  For non-degenerate manifolds this reduces to
    (1/d) * sum |M_ij|^4.
    """
    _check_secular(cs, field_gauss)
    h_a, h_b = _manifold_pair(cs, nucleus, field_gauss, include_mediated)
    ea = eig_hermitian(h_a)
    eb = eig_hermitian(h_b)
    m = ea.vectors.conj().T @ eb.vectors
    d = m.shape[0]
    wa = rad_per_us_to_mhz(ea.values)
    wb = rad_per_us_to_mhz(eb.values)
    gap_a = wa[None, None, :, None] - wa[:, None, None, None]
    gap_b = wb[None, :, None, None] - wb[None, None, None, :]
    mask = (np.abs(gap_a) < threshold) & (np.abs(gap_b) < threshold)
    c = np.einsum("ij,kj,kl,il->ijkl", m, m.conj(), m, m.conj())
    return float(np.real(np.sum(np.where(mask, c, 0.0)))) / d


def nn_modulation_frequencies(hyperfine, quadrupole, gamma_n, field_gauss,
                              cs=None, spin=1.0):
    """Analytic modulation frequencies (MHz) of a strongly coupled nucleus.

    Returns the sorted union of the tau-conjugate eigenvalue gaps of the two
    manifold Hamiltonians (with second-order electron-state corrections) and
    the closed-form dominant line

        f = sqrt((A_zz_eff - w_n)^2 + ((Q_xx - Q_yy)/2)^2 + Q_xy^2),

    which is where the double-quantum gap of the strongly-shifted manifold
    appears on the t = 2*tau axis of an echo curve.
    """
    from .bathgen import synthetic_spin

    if cs is None:
        cs = CentralSpin()
    nucleus = synthetic_spin(spin, gamma_n, hyperfine, quadrupole)
    h_a, h_b = _manifold_pair(cs, nucleus, field_gauss, include_mediated=True)
    wa = rad_per_us_to_mhz(eig_hermitian(h_a).values)
    wb = rad_per_us_to_mhz(eig_hermitian(h_b).values)
    gaps = []
    for w in (wa, wb):
        for i in range(w.size):
            for j in range(i + 1, w.size):
                gaps.append(abs(w[j] - w[i]))

    # Effective A_zz extracted from the alpha-manifold diagonal so that the
    # closed form includes the second-order shift.
    d = h_a.shape[0]
    m_labels = spin - np.arange(d)
    diag = rad_per_us_to_mhz(np.real(np.diag(h_a)))
    w_n = zeeman_rad_per_us(gamma_n, field_gauss) / TWO_PI
    if d >= 3:
        a_eff = (diag[0] - diag[-1]) / (m_labels[0] - m_labels[-1]) + w_n
    else:
        a_eff = (diag[0] - diag[-1]) + 2.0 * w_n
    q = np.asarray(quadrupole, dtype=float)
    dominant = np.sqrt(
        (a_eff - w_n) ** 2 + (0.5 * (q[0, 0] - q[1, 1])) ** 2 + q[0, 1] ** 2
    )
    freqs = sorted(set(np.round(gaps + [float(dominant)], 6)))
    return np.array([f for f in freqs if f > 0])


def cancellation_ratios(cs, bath, field_gauss, m_s):
    """Level-mixing channels Delta/Omega of every bath nucleus, in MHz.

    For each nucleus the manifold Hamiltonian is written in the Iz basis;
    Delta_(i,j) is the diagonal splitting, Omega_(i,j) the coupling: the
    direct matrix element for single-quantum channels, and the direct
    element plus the second-order two-step path sum for double-quantum
    channels.
    """
    channels = []
    for nid, nucleus in enumerate(bath.spins):
        h = nuclear_manifold_hamiltonian(nucleus, m_s, field_gauss).matrix / TWO_PI
        d = h.shape[0]
        m_labels = nucleus.species.spin - np.arange(d)
        diag = np.real(np.diag(h))
        for i in range(d):
            for j in range(i + 1, d):
                dm = int(round(abs(m_labels[i] - m_labels[j])))
                if dm == 1:
                    omega = abs(h[i, j])
                    kind = "single_quantum"
                elif dm == 2:
                    mean = 0.5 * (diag[i] + diag[j])
                    amp = h[i, j]
                    for k in range(d):
                        if k in (i, j):
                            continue
                        denom = mean - diag[k]
                        if abs(denom) < DEGENERACY_FLOOR:
                            continue
                        amp = amp + h[i, k] * h[k, j] / denom
                    omega = abs(amp)
                    kind = "double_quantum"
                else:
                    continue
                channels.append(
                    MixingChannel(
                        nucleus_id=nid,
                        m_s=m_s,
                        levels=(float(m_labels[i]), float(m_labels[j])),
                        kind=kind,
                        delta_mhz=abs(diag[i] - diag[j]),
                        omega_mhz=omega,
                    )
                )
    return channels


def max_mixing_ratio(cs, bath, field_gauss, m_s):
    """Largest Omega/Delta over all nuclei and channels at one field."""
    ratios = [ch.ratio for ch in cancellation_ratios(cs, bath, field_gauss, m_s)]
    return max(ratios) if ratios else 0.0


def transition_boundary(cs, bath, b_grid, m_s, composition=""):
    """Largest field where the maximal mixing ratio crosses 1.

    Linear interpolation between grid points locates the crossing; an
    infinite ratio (degenerate splitting) counts as >= 1.
    """
    b_grid = np.asarray(b_grid, dtype=float)
    ratios = np.array([max_mixing_ratio(cs, bath, b, m_s) for b in b_grid])
    above = ratios >= 1.0
    if not above.any():
        raise BoundaryRangeError("mixing ratio never reaches 1 on the grid")
    if above[-1]:
        raise BoundaryRangeError("mixing ratio still >= 1 at the top of the grid")
    k = int(np.flatnonzero(above)[-1])
    r0, r1 = ratios[k], ratios[k + 1]
    if np.isinf(r0):
        tb = float(b_grid[k])
    else:
        tb = float(b_grid[k] + (r0 - 1.0) * (b_grid[k + 1] - b_grid[k]) / (r0 - r1))
    return TbReport(composition=composition, b_grid=b_grid, max_ratio=ratios,
                    tb_gauss=tb)


def v0_product(cs, bath, b_grid, composition="", threshold=DEFAULT_V0_THRESHOLD,
               fit_band=(0.15, 0.45)):
    """Product of per-nucleus unmodulated fractions over a field grid.

    The x-intercept is where a linear fit of the rising edge (product values
    inside fit_band) crosses zero.
    """
    b_grid = np.asarray(b_grid, dtype=float)
    prod = np.empty(b_grid.size)
    for k, b in enumerate(b_grid):
        try:
            p = 1.0
            for nucleus in bath.spins:
                p *= unmodulated_fraction(cs, nucleus, b, threshold=threshold)
            prod[k] = p
        except SecularInvalidError:
            # fields inside the anti-crossing window carry no secular V0
            prod[k] = np.nan
    ok = np.isfinite(prod)
    lo, hi = fit_band
    rising = np.flatnonzero(ok & (prod >= lo) & (prod <= hi))
    if rising.size < 2:
        rising = np.flatnonzero(ok & (prod >= 0.05) & (prod <= 0.9))
    if rising.size < 2:
        raise BoundaryRangeError("no rising edge of the unmodulated product in range")
    slope, offset = np.polyfit(b_grid[rising], prod[rising], 1)
    if slope <= 0:
        raise BoundaryRangeError("unmodulated product does not rise with field")
    return TbReport(composition=composition, b_grid=b_grid, v0_product=prod,
                    v0_intercept_gauss=float(-offset / slope))


def dominant_frequency(curve):
    """Peak frequency (MHz) of the curve's spectrum on the t = 2*tau axis.

    Discrete Fourier transform of L - mean(L) with parabolic interpolation
    around the peak magnitude bin; returns None for a flat signal.
    """
    tau = np.asarray(curve.tau_grid, dtype=float)
    sig = np.asarray(curve.coherence)
    if np.ptp(np.abs(sig)) < 1.0e-6 and np.ptp(np.real(sig)) < 1.0e-6:
        return None
    dt = 2.0 * (tau[1] - tau[0])
    if not np.allclose(np.diff(tau), tau[1] - tau[0], rtol=1.0e-6, atol=1.0e-12):
        raise ValueError("dominant_frequency requires a uniform tau grid")
    x = sig - sig.mean()
    spec = np.abs(np.fft.fft(x))
    freqs = np.fft.fftfreq(x.size, d=dt)
    pos = freqs > 0
    mags = spec[pos]
    fpos = freqs[pos]
    k = int(np.argmax(mags))
    if 0 < k < mags.size - 1:
        denom = mags[k - 1] - 2.0 * mags[k] + mags[k + 1]
        shift = 0.5 * (mags[k - 1] - mags[k + 1]) / denom if denom != 0 else 0.0
        return float(fpos[k] + shift * (fpos[1] - fpos[0]))
    return float(fpos[k])


def modulation_depth(curve):
    """max over tau of 1 - |L(2tau)|."""
    return float(np.max(1.0 - np.abs(np.asarray(curve.coherence))))
