"""Command-line front end: fringe scans, computational-basis histograms, GHZ reports and calibration.

Configuration is a JSON document::

    {
      "schema_version": 1,
      "mode": "exact",              # or "sampled"
      "rate_hz": 0.2,               # detected rate before converter losses
      "duration_s": 7200,           # per measurement setting
      "theta_grid": null,           # radians; null = k*pi/18, k = 0..18
      "output_dir": "out",
      "seed": 0,
      "noise": {...},               # NoiseParams fields, missing ones take defaults
      "calibration": {"population": 0.814, "coherence": 0.602,
                      "free": ["bitflip_prob", "fusion_visibility"]}   # optional
    }

Command-line flags override the file.
"""
from __future__ import annotations

import argparse
import enum
import logging
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import formats
from .analysis import (
    GhzReport,
    coherence_from_series,
    coherence_thetas,
    fringe_fit,
    population,
    snr,
    snr_from_counts,
)
from .calibration import DEFAULT_FREE, calibrate_noise
from .errors import ConfigurationError, HyperGHZError
from .pipeline import (
    SUPPORTED_SIZES,
    MeasurementSetting,
    OutcomeHistogram,
    build_hyper_ghz18,
    build_subexperiment,
    default_theta_grid,
    derive_seed,
    effective_rate,
    fringe_scan,
    outcome_distribution,
    sample_histogram,
)
from .source import NoiseParams

SCHEMA_VERSION = 1
log = logging.getLogger("hyperghz")


class Mode(str, enum.Enum):
    EXACT = "exact"
    SAMPLED = "sampled"


@dataclass(frozen=True)
class CalibrationTarget:
    population: float
    coherence: float
    free: tuple = DEFAULT_FREE

    def to_dict(self) -> dict:
        return {"population": self.population, "coherence": self.coherence, "free": list(self.free)}


@dataclass(frozen=True)
class RunConfig:
    noise: NoiseParams = field(default_factory=NoiseParams)
    mode: Mode = Mode.EXACT
    rate_hz: float = 0.2
    duration_s: float = 7200.0
    theta_grid: tuple = tuple(default_theta_grid().tolist())
    output_dir: Path = Path("out")
    seed: int = 0
    calibration: CalibrationTarget | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        object.__setattr__(self, "theta_grid", tuple(float(t) for t in self.theta_grid))
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported config schema_version {self.schema_version}")
        if self.rate_hz < 0 or self.duration_s < 0:
            raise ConfigurationError("rate_hz and duration_s must be non-negative")
        if self.mode is Mode.SAMPLED and self.rate_hz <= 0:
            raise ConfigurationError("sampled mode needs rate_hz > 0")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigurationError("seed must be a non-negative integer")
        grid = np.asarray(self.theta_grid)
        if len(grid) == 0 or np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > math.pi + 1e-12:
            raise ConfigurationError("theta_grid must be strictly increasing within [0, pi]")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        known = {"schema_version", "mode", "rate_hz", "duration_s", "theta_grid", "output_dir", "seed",
                 "noise", "calibration"}
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"unknown config key(s): {sorted(extra)}")
        if "noise" in data:
            # partial noise sections fill in from the defaults
            data["noise"] = NoiseParams.from_dict(data["noise"])
        if data.get("theta_grid") is None:
            data.pop("theta_grid", None)
        cal = data.get("calibration")
        if cal is not None:
            data["calibration"] = CalibrationTarget(float(cal["population"]), float(cal["coherence"]),
                                                    tuple(cal.get("free", DEFAULT_FREE)))
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(formats.load_json(path))

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "mode": self.mode.value,
            "rate_hz": self.rate_hz,
            "duration_s": self.duration_s,
            "theta_grid": list(self.theta_grid),
            "output_dir": str(self.output_dir),
            "seed": self.seed,
            "noise": self.noise.to_dict(),
            "calibration": None if self.calibration is None else self.calibration.to_dict(),
        }


def resolve_noise(config: RunConfig) -> NoiseParams:
    """The config's noise, after calibration when the config asks for it."""
    if config.calibration is None:
        return config.noise
    cal = config.calibration
    return calibrate_noise(cal.population, cal.coherence, config.noise, free=cal.free)


def _sig(x: float) -> str:
    return f"{x:.6g}"


def _out(config: RunConfig) -> Path:
    config.output_dir.mkdir(parents=True, exist_ok=True)
    return config.output_dir


def _scan(ens, n: int, thetas, config: RunConfig, noise: NoiseParams):
    if config.mode is Mode.EXACT:
        return fringe_scan(ens, n, thetas)
    rate = effective_rate(config.rate_hz, noise, ens.register)
    return fringe_scan(ens, n, thetas, rate_hz=rate, duration_s=config.duration_s, seed=config.seed)


def cmd_fringes(config: RunConfig, n_qubits: int, noise: NoiseParams | None = None) -> dict:
    """Fringe scan of one sub-experiment; writes fringes_N{n}.csv and fringes_N{n}_fit.json."""
    if n_qubits not in SUPPORTED_SIZES:
        raise ConfigurationError(f"N must be one of {SUPPORTED_SIZES}")
    noise = resolve_noise(config) if noise is None else noise
    ens = build_subexperiment(n_qubits, noise)
    series = _scan(ens, n_qubits, config.theta_grid, config, noise)
    out = _out(config)
    formats.write_fringe_csv(series, out / f"fringes_N{n_qubits}.csv")
    fit = fringe_fit(series)
    summary = {"n_qubits": n_qubits, "mode": config.mode.value, "fit": fit.to_dict(), "noise_params": noise.to_dict()}
    formats.save_json(summary, out / f"fringes_N{n_qubits}_fit.json")
    if fit.nyquist_limited:
        freq = f"held at {n_qubits} (grid at the Nyquist limit)"
    else:
        freq = f"{_sig(fit.frequency)} ({'ok' if fit.frequency_ok else 'off'})"
    print(f"N={n_qubits}: visibility {_sig(fit.visibility)}, frequency {freq}, rms residual {_sig(fit.rms_residual)}")
    return summary


def _zbasis_data(config: RunConfig, noise: NoiseParams, ens=None):
    ens = build_hyper_ghz18(noise) if ens is None else ens
    setting = MeasurementSetting.computational(ens.register)
    dist = outcome_distribution(ens, setting)
    if config.mode is Mode.EXACT:
        return dist, None
    rate = effective_rate(config.rate_hz, noise, ens.register)
    return dist, sample_histogram(dist, rate, config.duration_s, derive_seed(config.seed, 0, 0))


def _population_snr(dist, hist: OutcomeHistogram | None):
    n = dist.n_qubits
    if hist is None:
        p = dist.prob(0) + dist.prob((1 << n) - 1)
        return (p, 0.0), snr_from_counts(p, 1.0, n)
    if hist.total_events == 0:
        return None, None
    return population(hist), snr(hist)


def cmd_zbasis(config: RunConfig, noise: NoiseParams | None = None) -> dict:
    """Computational-basis readout of all 18 qubits: counts, 512x512 matrix, population and SNR."""
    noise = resolve_noise(config) if noise is None else noise
    dist, hist = _zbasis_data(config, noise)
    n = dist.n_qubits
    out = _out(config)
    values = dist.as_dict() if hist is None else hist.counts
    # exact mode writes probabilities in the count columns
    formats.write_histogram_csv(values, n, out / "zbasis_counts.csv")
    formats.write_matrix_csv(values, n, out / "zbasis_matrix.csv")
    pop, snr_value = _population_snr(dist, hist)
    summary = {
        "mode": config.mode.value,
        "total_events": None if hist is None else hist.total_events,
        "duration_s": config.duration_s,
        "population": None if pop is None else pop[0],
        "population_err": None if pop is None else pop[1],
        "snr": snr_value,
        "noise_params": noise.to_dict(),
    }
    formats.save_json(summary, out / "zbasis_summary.json")
    if pop is None:
        print("zbasis: no events recorded; population and SNR undefined")
    else:
        print(f"zbasis: population {_sig(pop[0])} +/- {_sig(pop[1])}, SNR {_sig(snr_value)}")
    return summary


def cmd_report(config: RunConfig, noise: NoiseParams | None = None) -> GhzReport:
    """Population, coherence, fidelity, witness and SNR of the 18-qubit state; writes report.json."""
    noise = resolve_noise(config) if noise is None else noise
    ens = build_hyper_ghz18(noise)
    dist, hist = _zbasis_data(config, noise, ens)
    pop, snr_value = _population_snr(dist, hist)
    if pop is None:
        raise ConfigurationError("the computational-basis acquisition recorded no events")
    series = _scan(ens, 18, coherence_thetas(18), config, noise)
    coh = coherence_from_series(series)
    report = GhzReport.from_estimates(pop, coh, snr_value, noise.to_dict())
    formats.save_json(report.to_dict(), _out(config) / "report.json")
    print(f"population {_sig(report.population)} +/- {_sig(report.population_err)}")
    print(f"coherence  {_sig(report.coherence)} +/- {_sig(report.coherence_err)}")
    print(f"fidelity   {_sig(report.fidelity)} +/- {_sig(report.fidelity_err)}")
    print(f"witness    {_sig(report.witness_sigma)} sigma, SNR {_sig(report.snr)}")
    return report


def cmd_calibrate(config: RunConfig, target_population: float, target_coherence: float) -> NoiseParams:
    free = config.calibration.free if config.calibration is not None else DEFAULT_FREE
    noise = calibrate_noise(target_population, target_coherence, config.noise, free=free)
    payload = {"targets": {"population": target_population, "coherence": target_coherence},
               "free": list(free), "noise_params": noise.to_dict()}
    formats.save_json(payload, _out(config) / "calibrated_noise.json")
    print(", ".join(f"{k} = {_sig(getattr(noise, k))}" for k in free))
    return noise


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--exact", dest="mode", action="store_const", const=Mode.EXACT, help="analytic probabilities")
    mode.add_argument("--sampled", dest="mode", action="store_const", const=Mode.SAMPLED,
                      help="Poisson-sampled acquisitions")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hyperghz", description="18-qubit hyper-entangled GHZ simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("fringes", parents=[common], help="parity fringe scan for N = 1, 3, 12 or 18")
    p.add_argument("--n", type=int, required=True, choices=SUPPORTED_SIZES)
    sub.add_parser("zbasis", parents=[common], help="computational-basis histogram and 512x512 matrix")
    sub.add_parser("report", parents=[common], help="population, coherence, fidelity, witness, SNR")
    p = sub.add_parser("calibrate", parents=[common], help="fit noise parameters to a population/coherence pair")
    p.add_argument("--population", type=float, required=True)
    p.add_argument("--coherence", type=float, required=True)
    return parser


def config_from_args(args) -> RunConfig:
    config = RunConfig.load(args.config) if args.config else RunConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.mode is not None:
        changes["mode"] = args.mode
    if args.out is not None:
        changes["output_dir"] = args.out
    return replace(config, **changes) if changes else config


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = config_from_args(args)
        if args.command == "fringes":
            cmd_fringes(config, args.n)
        elif args.command == "zbasis":
            cmd_zbasis(config)
        elif args.command == "report":
            cmd_report(config)
        else:
            cmd_calibrate(config, args.population, args.coherence)
    except HyperGHZError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
