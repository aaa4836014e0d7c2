"""Experiment orchestration: config parsing, presets, T2 fitting, file I/O.

Configuration files are flat key-value text (`key = value`, `#` comments);
unknown keys are rejected.  Sweeps write one CSV per field plus a summary
JSON; identical config + seed reproduce byte-identical outputs for any
thread count.
"""

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import curve_fit

from .bathgen import BathConfig, build_bath, resolve_composition
from .cce import field_sweep
from .eseem import (
    dominant_frequency,
    transition_boundary,
    v0_product,
)
from .hamiltonian import CentralSpin

SCHEMA_VERSION = 1

#: Window length (samples) of the right-to-left running-max echo envelope.
ENVELOPE_WINDOW = 5


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class OutOfSpanError(ValueError):
    """The coherence never decays below 1/e within the tau span."""


@dataclass
class ExperimentConfig:
    composition: str = "natural"
    bath_radius: float = 18.0
    r_dipole: float = 8.0
    seed: int = 1
    layers: int = None
    method: str = "gCCE2"
    qubit_levels: tuple = (0, 1)
    electron_space: str = "auto"
    b_grid: tuple = tuple(np.arange(100.0, 5001.0, 100.0))
    tau_max: float = 2.0
    tau_points: int = 512
    dft_table_path: str = None
    threads: int = 1

    def tau_grid(self):
        return np.linspace(0.0, self.tau_max, self.tau_points)

    def bath_config(self):
        return BathConfig(
            composition=self.composition,
            bath_radius=self.bath_radius,
            r_dipole=self.r_dipole,
            seed=self.seed,
            dft_table_path=self.dft_table_path,
            layers=self.layers,
        )

    def central_spin(self):
        return CentralSpin(qubit_levels=tuple(self.qubit_levels))

    def validate(self):
        if len(self.b_grid) == 0:
            raise ConfigError("b_grid must contain at least one field")
        if self.tau_points < 2:
            raise ConfigError("tau_points must be at least 2")
        if self.tau_max <= 0:
            raise ConfigError("tau_max must be positive")
        try:
            resolve_composition(self.composition)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self


def _parse_b_grid(text):
    """'start:stop:step' (inclusive stop) or comma-separated values, Gauss."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3:
            raise ConfigError(f"b_grid range must be start:stop:step, got {text!r}")
        start, stop, step = parts
        if step <= 0:
            raise ConfigError("b_grid step must be positive")
        return tuple(np.arange(start, stop + 0.5 * step, step))
    values = tuple(float(p) for p in text.split(",") if p.strip())
    if not values:
        raise ConfigError("empty b_grid")
    return values


def _parse_qubit_levels(text):
    parts = [int(p) for p in text.replace("(", "").replace(")", "").split(",")]
    if len(parts) != 2:
        raise ConfigError(f"qubit_levels must be two m_s labels, got {text!r}")
    return tuple(parts)


_PARSERS = {
    "composition": str,
    "bath_radius": float,
    "r_dipole": float,
    "seed": int,
    "layers": int,
    "method": str,
    "qubit_levels": _parse_qubit_levels,
    "electron_space": str,
    "b_grid": _parse_b_grid,
    "tau_max": float,
    "tau_points": int,
    "dft_table_path": str,
    "threads": int,
}


def parse_config(path):
    """Read a flat key-value config file into an ExperimentConfig."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key = key.strip()
            val = val.strip()
            if key not in _PARSERS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _PARSERS[key](val)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return ExperimentConfig(**values).validate()


#: Named experiment presets.  Desk-scale presets use a reduced bath and a
#: coarser field grid so they run on a laptop; the full-scale map matches
#: the published methodology (order 2, 18 A bath, 8 A pair radius).
PRESETS = {
    "desk-coherence-map": ExperimentConfig(
        composition="11B14N", bath_radius=10.0, layers=1, r_dipole=6.0,
        method="gCCE2", b_grid=tuple(np.arange(400.0, 3201.0, 400.0)),
        tau_max=2.0, tau_points=256,
    ),
    "desk-field-scan": ExperimentConfig(
        composition="11B14N", bath_radius=6.0, layers=1, r_dipole=6.0,
        method="gCCE2", b_grid=(500.0, 1000.0), tau_max=2.0, tau_points=256,
    ),
    "first-shell-modulation": ExperimentConfig(
        composition="11B14N", bath_radius=1.6, r_dipole=1.0,
        method="gCCE1", b_grid=(100.0, 500.0, 1000.0),
        tau_max=2.0, tau_points=512,
    ),
    "mediated-modulation": ExperimentConfig(
        composition="11B14N", bath_radius=4.0, layers=1, r_dipole=4.0,
        method="cCCE2_mediated", b_grid=(30000.0,), tau_max=200.0,
        tau_points=512,
    ),
    "cancellation-14N": ExperimentConfig(
        composition="11B14N", bath_radius=4.0, layers=1, r_dipole=4.0,
        method="hybrid_core", b_grid=(14200.0,), tau_max=4.0, tau_points=1024,
    ),
    "cancellation-15N": ExperimentConfig(
        composition="11B15N", bath_radius=4.0, layers=1, r_dipole=4.0,
        method="hybrid_core", b_grid=(14200.0,), tau_max=4.0, tau_points=1024,
    ),
    "tb-analysis": ExperimentConfig(
        composition="11B14N", bath_radius=10.0, r_dipole=6.0,
        b_grid=tuple(np.arange(100.0, 10001.0, 100.0)),
    ),
    "full-coherence-map": ExperimentConfig(
        composition="11B14N", bath_radius=18.0, r_dipole=8.0,
        method="gCCE2",
        b_grid=tuple(np.arange(100.0, 5001.0, 100.0))
        + tuple(np.arange(5500.0, 10001.0, 500.0)),
        tau_max=2.0, tau_points=512,
    ),
}


@dataclass
class T2Result:
    t2_us: float
    definition: str  # envelope_1_over_e or stretched_exp_fit
    stretch_n: float = None
    fit_residual: float = None
    t2_fit_us: float = None
    fit_failed: bool = False


def coherence_envelope(abs_l, window=ENVELOPE_WINDOW):
    """Upper envelope: running maximum over `window` samples, right-to-left."""
    abs_l = np.asarray(abs_l, dtype=float)
    n = abs_l.size
    env = np.empty(n)
    running = -np.inf
    # right-to-left pass bounds the envelope by the forward-window maximum
    for i in range(n - 1, -1, -1):
        hi = min(i + window, n)
        running = max(abs_l[i:hi].max(), 0.0)
        env[i] = running
    # enforce monotone non-increasing tail behavior within the window
    for i in range(n - 2, -1, -1):
        if i + window >= n:
            env[i] = max(env[i], env[i + 1])
    return env


def fit_t2(curve):
    """1/e envelope crossing time, plus a stretched-exponential fit.

    The primary T2 is the first total time t = 2*tau where the upper
    envelope of |L| crosses 1/e (linear interpolation between samples).  A
    least-squares fit of exp[-(t/T2)^n] to the envelope provides the
    secondary estimate.
    """
    t = curve.time_grid
    env = coherence_envelope(np.abs(curve.coherence))
    target = 1.0 / np.e
    below = np.flatnonzero(env < target)
    if below.size == 0:
        raise OutOfSpanError("envelope never decays below 1/e within the tau span")
    k = int(below[0])
    if k == 0:
        t2_env = float(t[0])
    else:
        f0, f1 = env[k - 1], env[k]
        t2_env = float(t[k - 1] + (f0 - target) * (t[k] - t[k - 1]) / (f0 - f1))
    result = T2Result(t2_us=t2_env, definition="envelope_1_over_e")
    try:
        def model(tt, t2, n):
            return np.exp(-((tt / t2) ** n))

        popt, _ = curve_fit(
            model, t, env, p0=(max(t2_env, 1.0e-6), 1.5),
            bounds=([1.0e-9, 0.5], [np.inf, 4.0]), maxfev=10000,
        )
        resid = float(np.sqrt(np.mean((model(t, *popt) - env) ** 2)))
        result.t2_fit_us = float(popt[0])
        result.stretch_n = float(popt[1])
        result.fit_residual = resid
    except (RuntimeError, ValueError):
        result.fit_failed = True
    return result


def _field_tag(b):
    return f"{b:g}"


def write_curve_csv(path, curve):
    """CSV schema: tau_us,t_us,re_L,im_L,abs_L (full float precision)."""
    lines = ["tau_us,t_us,re_L,im_L,abs_L"]
    for tau, l in zip(curve.tau_grid, curve.coherence):
        lines.append(
            f"{tau:.17g},{2.0 * tau:.17g},{l.real:.17g},{l.imag:.17g},{abs(l):.17g}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_curve_csv(path):
    """Parse a coherence CSV back into (tau_grid, complex L)."""
    rows = Path(path).read_text().strip().splitlines()
    header = rows[0].strip()
    if header != "tau_us,t_us,re_L,im_L,abs_L":
        raise ValueError(f"{path}: unexpected CSV header {header!r}")
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    return data[:, 0], data[:, 2] + 1j * data[:, 3]


def run_sweep(config, out_dir):
    """Field sweep -> per-field CSVs + summary JSON.  Returns the summary."""
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cs = config.central_spin()
    bath = build_bath(config.bath_config())
    fmap = field_sweep(
        cs, bath, np.asarray(config.b_grid, dtype=float), config.tau_grid(),
        method=config.method, r_dipole=config.r_dipole,
        electron_space=config.electron_space, threads=config.threads,
    )
    fields = {}
    for curve in fmap.curves:
        tag = _field_tag(curve.field_gauss)
        csv_name = f"coh_B{tag}G.csv"
        write_curve_csv(out / csv_name, curve)
        entry = {"csv": csv_name, "clamped_divisions":
                 bool(curve.metadata.get("clamped_divisions", False))}
        freq = dominant_frequency(curve)
        entry["dominant_frequency_mhz"] = freq
        try:
            t2 = fit_t2(curve)
            entry["t2_envelope_us"] = t2.t2_us
            entry["t2_fit_us"] = t2.t2_fit_us
            entry["stretch_n"] = t2.stretch_n
        except OutOfSpanError as exc:
            entry["t2_error"] = str(exc)
        fields[tag] = entry
    summary = {
        "schema_version": SCHEMA_VERSION,
        "task": "sweep",
        "config": _config_dict(config),
        "fields": fields,
        "field_errors": {f"{b:g}": msg for b, msg in fmap.errors.items()},
    }
    _write_summary(out, summary)
    return summary


def run_tb(config, out_dir):
    """Transition-boundary + unmodulated-product analysis -> summary JSON."""
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cs = config.central_spin()
    bath = build_bath(config.bath_config())
    b_grid = np.asarray(config.b_grid, dtype=float)
    m_s = config.qubit_levels[1] if config.qubit_levels[1] != 0 else config.qubit_levels[0]
    report = transition_boundary(cs, bath, b_grid, m_s,
                                 composition=str(config.composition))
    product = v0_product(cs, bath, b_grid, composition=str(config.composition))
    summary = {
        "schema_version": SCHEMA_VERSION,
        "task": "tb",
        "config": _config_dict(config),
        "tb_gauss": report.tb_gauss,
        "max_ratio": list(map(float, report.max_ratio)),
        "v0_intercept_gauss": product.v0_intercept_gauss,
        "v0_product": [None if not np.isfinite(v) else float(v)
                       for v in product.v0_product],
        "b_grid": list(map(float, b_grid)),
    }
    _write_summary(out, summary)
    return summary


def run_eseem(config, out_dir):
    """Per-nucleus decomposition of every tabulated spin -> summary JSON."""
    from .eseem import eseem_decompose

    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cs = config.central_spin()
    bath = build_bath(config.bath_config())
    tau = config.tau_grid()
    nuclei = {}
    for b in config.b_grid:
        per_field = []
        for i, spin in enumerate(bath.spins):
            if spin.a_source != "dft_table":
                continue
            terms = eseem_decompose(cs, spin, float(b), tau, nucleus_id=i)
            per_field.append({
                "nucleus": i,
                "species": spin.species.name,
                "shell": spin.site.shell_index,
                "v0": terms.v0,
                "frequencies_alpha_mhz": list(map(float, terms.frequencies_alpha)),
                "frequencies_beta_mhz": list(map(float, terms.frequencies_beta)),
            })
        nuclei[f"{b:g}"] = per_field
    summary = {
        "schema_version": SCHEMA_VERSION,
        "task": "eseem",
        "config": _config_dict(config),
        "nuclei": nuclei,
    }
    _write_summary(out, summary)
    return summary


def run_fit(csv_path, out_dir=None):
    """Fit T2 of an existing coherence CSV; returns the T2 summary dict."""
    from .cce import CoherenceCurve

    tau, l = read_curve_csv(csv_path)
    curve = CoherenceCurve(tau_grid=tau, coherence=l, field_gauss=float("nan"),
                           method="from_csv")
    t2 = fit_t2(curve)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "task": "fit",
        "csv": str(csv_path),
        "t2_envelope_us": t2.t2_us,
        "t2_fit_us": t2.t2_fit_us,
        "stretch_n": t2.stretch_n,
        "fit_residual": t2.fit_residual,
        "fit_failed": t2.fit_failed,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_summary(out, summary)
    return summary


def _config_dict(config):
    d = dataclasses.asdict(config)
    d["b_grid"] = list(map(float, d["b_grid"]))
    d["qubit_levels"] = list(d["qubit_levels"])
    return d


def _write_summary(out, summary):
    path = Path(out) / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return path
