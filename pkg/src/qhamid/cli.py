"""
Command-line front end: ``qhamid {simulate,characterize,paper,spectrum}``.

Configuration is an INI file; command-line flags override it. Example::

    [simulation]           ; hidden Hamiltonian (or: d = nine numbers, row-major)
    j = 1.0
    beta = 0.01, 0.005, 0.02
    gamma = 0.003, 0.005, 0.001, 0.0015, 0.0024, 0.0009

    [data]                 ; alternative to [simulation]
    traces = psi1.csv, psi2.csv, psi3.csv
    measurements = previous/report.json

    [sampling]
    dt = 0.25
    samples = 16384

    [noise]
    shots = 0
    seed = 0

    [pipeline]
    j = 1.0                ; exchange scale used to extract beta and gamma
    mode = general         ; or "paper"
    budget = 4096
    t_max = 10.0

    [tolerances]           ; any Tolerances field
    match = 5e-3

Exit codes: 0 success, 1 pipeline failure or golden mismatch, 2 configuration error.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import golden, qcore
from .errors import CharacterizationError, TraceParseError
from .expsim import DEFAULT_DT, DEFAULT_SAMPLES, NoiseConfig, SimulatedOracle, read_trace, simulate_trace, write_trace
from .model import SpinOrbitParams, spin_orbit_to_coupling
from .reconstruct import CharacterizationResult, Measurement, ReplayOracle, Tolerances, characterize
from .spectral import periodogram, write_spectrum

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2
U64_MAX = 2**64 - 1


class ConfigError(Exception):
    pass


@dataclass
class PipelineConfig:
    d: Optional[np.ndarray] = None
    trace_paths: list = field(default_factory=list)
    measurements_path: Optional[Path] = None
    dt: float = DEFAULT_DT
    samples: int = DEFAULT_SAMPLES
    shots: int = 0
    seed: int = 0
    workers: int = 1
    j: float = 1.0
    mode: str = "general"
    budget: int = 4096
    t_max: float = 10.0
    tolerances: dict = field(default_factory=dict)
    out: Path = Path("qhamid-out")

    @property
    def simulation(self) -> bool:
        return self.d is not None

    def tolerance_set(self) -> Tolerances:
        base = Tolerances.noisy() if self.shots > 0 else Tolerances()
        return dataclasses.replace(base, **self.tolerances)

    def validate(self):
        if (self.d is None) == (not self.trace_paths):
            raise ConfigError("configure exactly one of [simulation] or [data]")
        if self.dt <= 0 or self.samples < 16 or self.samples & (self.samples - 1):
            raise ConfigError("dt must be positive and samples a power of two >= 16")
        if self.shots < 0 or not 0 <= self.seed <= U64_MAX or self.workers < 1:
            raise ConfigError("shots >= 0, 0 <= seed < 2**64 and workers >= 1 required")
        if self.mode not in ("general", "paper"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.j == 0 or self.budget < 1 or self.t_max <= 0:
            raise ConfigError("j must be non-zero, budget and t_max positive")
        tol = self.tolerance_set()
        for name, value in dataclasses.asdict(tol).items():
            if name != "polish" and not value > 0:
                raise ConfigError(f"tolerance {name} must be positive")


def _floats(text: str, count: int, name: str) -> list:
    try:
        values = [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{name}: expected numbers, got {text!r}") from None
    if len(values) != count:
        raise ConfigError(f"{name}: expected {count} numbers, got {len(values)}")
    return values


def load_config(path: Optional[Path]) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        if not parser.read(path, encoding="utf-8"):
            raise ConfigError(f"cannot read config {path}")
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    base = Path(path).parent
    try:
        if parser.has_section("simulation"):
            sim = parser["simulation"]
            if "d" in sim:
                cfg.d = np.array(_floats(sim["d"], 9, "d")).reshape(3, 3)
            else:
                params = SpinOrbitParams(
                    J=sim.getfloat("j", 1.0),
                    beta=_floats(sim.get("beta", "0 0 0"), 3, "beta"),
                    gamma=_floats(sim.get("gamma", "0 0 0 0 0 0"), 6, "gamma"),
                )
                cfg.d = spin_orbit_to_coupling(params)
        if parser.has_section("data"):
            data = parser["data"]
            cfg.trace_paths = [base / p.strip() for p in data.get("traces", "").split(",") if p.strip()]
            if "measurements" in data:
                cfg.measurements_path = base / data["measurements"].strip()
            if not cfg.trace_paths:
                raise ConfigError("[data] needs a traces entry")
        s = parser["sampling"] if parser.has_section("sampling") else {}
        cfg.dt = float(s.get("dt", cfg.dt))
        cfg.samples = int(s.get("samples", cfg.samples))
        n = parser["noise"] if parser.has_section("noise") else {}
        cfg.shots = int(n.get("shots", cfg.shots))
        cfg.seed = int(n.get("seed", cfg.seed))
        p = parser["pipeline"] if parser.has_section("pipeline") else {}
        cfg.j = float(p.get("j", cfg.j))
        cfg.mode = p.get("mode", cfg.mode).strip()
        cfg.budget = int(p.get("budget", cfg.budget))
        cfg.t_max = float(p.get("t_max", cfg.t_max))
        cfg.workers = int(p.get("workers", cfg.workers))
        if parser.has_section("output") and "dir" in parser["output"]:
            cfg.out = base / parser["output"]["dir"].strip()
        if parser.has_section("tolerances"):
            known = {f.name: f.type for f in dataclasses.fields(Tolerances)}
            for key, value in parser["tolerances"].items():
                if key not in known:
                    raise ConfigError(f"unknown tolerance {key!r}")
                cfg.tolerances[key] = value.strip().lower() in ("1", "true", "yes") if key == "polish" else float(value)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"invalid configuration value: {exc}") from None
    return cfg


# --- report -------------------------------------------------------------------------


def build_report(result: CharacterizationResult, j: float) -> dict:
    cls = result.cls
    params = result.params
    return {
        "schema_version": SCHEMA_VERSION,
        "status": result.status,
        "stage": result.stage,
        "error": result.message,
        "class": None if cls is None else {"c": list(cls.c), "det_sign": cls.det_sign},
        "audit": dict(result.audit),
        "d": None if result.d is None else np.asarray(result.d).tolist(),
        "beta": None if params is None else list(params.beta),
        "gamma": None if params is None else list(params.gamma),
        "j": j,
        "measurements": [dataclasses.asdict(m) for m in result.measurements],
        "tolerances": result.tolerances.as_dict() if result.tolerances else None,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


REPORT_FIELDS = ("schema_version", "status", "class", "audit", "d", "beta", "gamma", "j",
                 "measurements", "tolerances")


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def parse_report(text: str) -> dict:
    report = json.loads(text)
    missing = [k for k in REPORT_FIELDS if k not in report]
    if missing:
        raise ValueError(f"report lacks fields {missing}")
    if report["schema_version"] != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {report['schema_version']}")
    if report["status"] not in ("unique", "ambiguous", "failed"):
        raise ValueError(f"invalid status {report['status']!r}")
    return report


def read_report(path) -> dict:
    return parse_report(Path(path).read_text(encoding="utf-8"))


def report_measurements(report: dict) -> list:
    return [Measurement(m["state_id"], m["t"], m["c2"]) for m in report["measurements"]]


PLOT_SCRIPT = '''\
# Renders the spectrum_<state>.csv files next to this script.
import glob, os
import numpy as np
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
fig, ax = plt.subplots(figsize=(8, 4))
for path in sorted(glob.glob(os.path.join(here, "spectrum_*.csv"))):
    w, p = np.loadtxt(path, delimiter=",", comments="#", unpack=True)
    ax.semilogy(w[1:], p[1:], lw=0.8, label=os.path.basename(path)[9:-4])
ax.set_xlabel("omega")
ax.set_ylabel("power")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(here, "spectra.png"), dpi=150)
'''


# --- commands -----------------------------------------------------------------------


def _simulated_traces(cfg: PipelineConfig) -> list:
    noise = NoiseConfig(cfg.shots, cfg.seed)
    return [simulate_trace(cfg.d, sid, cfg.dt, cfg.samples, noise, workers=cfg.workers)
            for sid in qcore.PROBE_IDS]


def cmd_simulate(cfg: PipelineConfig, args) -> int:
    if not cfg.simulation:
        raise ConfigError("simulate needs a [simulation] section")
    cfg.out.mkdir(parents=True, exist_ok=True)
    for trace in _simulated_traces(cfg):
        path = write_trace(trace, cfg.out / f"trace_{trace.input_state_id}.csv")
        print(f"{path}\t{trace.n} rows")
    return EXIT_OK


def _run(cfg: PipelineConfig) -> tuple:
    if cfg.simulation:
        traces = _simulated_traces(cfg)
        oracle = SimulatedOracle(cfg.d, NoiseConfig(cfg.shots, cfg.seed))
    else:
        traces = [read_trace(p) for p in cfg.trace_paths]
        recorded = report_measurements(read_report(cfg.measurements_path)) if cfg.measurements_path else []
        oracle = ReplayOracle(recorded)
    result = characterize(traces, oracle, J=cfg.j, tol=cfg.tolerance_set(), mode=cfg.mode,
                          budget=cfg.budget, seed=cfg.seed, t_max=cfg.t_max)
    return traces, result


def cmd_characterize(cfg: PipelineConfig, args) -> int:
    traces, result = _run(cfg)
    report = build_report(result, cfg.j)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "report.json").write_text(dump_report(report), encoding="utf-8")
    for tr in traces:
        write_spectrum(periodogram(tr), cfg.out / f"spectrum_{tr.input_state_id}.csv")
    (cfg.out / "plot_spectra.py").write_text(PLOT_SCRIPT, encoding="utf-8")
    if args.json:
        sys.stdout.write(dump_report(report))
    else:
        print(f"status: {result.status}")
        if result.status == "failed":
            print(f"stage: {result.stage}: {result.message}")
        if result.params is not None:
            print(f"beta: {list(result.params.beta)}")
            print(f"gamma: {list(result.params.gamma)}")
        print(f"report: {cfg.out / 'report.json'}")
    return EXIT_OK if result.status == "unique" else EXIT_FAILURE


def cmd_paper(cfg: PipelineConfig, args) -> int:
    scenario = golden.run_paper_scenario(cfg.dt, cfg.samples, cfg.workers)
    lines = golden.golden_lines(scenario)
    if args.json:
        sys.stdout.write(json.dumps([dataclasses.asdict(ln) for ln in lines], indent=2) + "\n")
    else:
        for ln in lines:
            print(ln.format())
        failed = sum(not ln.passed for ln in lines)
        print(f"{len(lines) - failed}/{len(lines)} golden lines pass")
    return EXIT_OK if all(ln.passed for ln in lines) else EXIT_FAILURE


def cmd_spectrum(cfg: PipelineConfig, args) -> int:
    if not args.traces:
        raise ConfigError("spectrum needs at least one trace file")
    cfg.out.mkdir(parents=True, exist_ok=True)
    for path in args.traces:
        trace = read_trace(path)
        out = write_spectrum(periodogram(trace), cfg.out / f"spectrum_{trace.input_state_id}.csv")
        print(out)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "characterize": cmd_characterize,
    "paper": cmd_paper,
    "spectrum": cmd_spectrum,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI configuration file (see module docs)")
    common.add_argument("--out", type=Path, help="output directory (default: qhamid-out)")
    common.add_argument("--seed", type=int, help="noise / probe-search seed, 0..2**64-1 (default: 0)")
    common.add_argument("--shots", type=int, help="shots per point, 0 = noiseless (default: 0)")
    common.add_argument("--dt", type=float, help=f"sampling step (default: {DEFAULT_DT})")
    common.add_argument("--samples", type=int, help=f"samples per trace, power of two (default: {DEFAULT_SAMPLES})")
    common.add_argument("--workers", type=int, help="worker threads for noise sampling (default: 1)")
    common.add_argument("--json", action="store_true", help="print the report as JSON on stdout")
    parser = argparse.ArgumentParser(prog="qhamid", description=__doc__.split("\n\n")[1],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="write probe-state concurrence traces")
    sub.add_parser("characterize", parents=[common], help="reconstruct the Hamiltonian, write report.json")
    sub.add_parser("paper", parents=[common], help="reproduce the published example and compare")
    sp = sub.add_parser("spectrum", parents=[common], help="convert trace CSVs to spectrum CSVs")
    sp.add_argument("traces", nargs="*", type=Path)
    return parser


def _apply_flags(cfg: PipelineConfig, args):
    for name in ("seed", "shots", "dt", "samples", "workers"):
        value = getattr(args, name)
        if value is not None:
            setattr(cfg, name, value)
    if args.out is not None:
        cfg.out = args.out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        _apply_flags(cfg, args)
        if args.command in ("simulate", "characterize"):
            cfg.validate()
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CharacterizationError, TraceParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
