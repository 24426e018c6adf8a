"""``rpimon`` batch driver.

    rpimon CONFIG [--set key=value]... [--threads N] [--out DIR]

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 I/O error. Files written before a failure are removed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checks import run_all
from .config import ConfigError, RunConfig, parse_config
from .hilbert import (
    Constants,
    build_oscillator,
    build_qubit,
    coherent_state,
    fock_state,
    projector,
)
from .lattice import (
    LatticeSpec,
    convergence_csv,
    convergence_study,
    harmonic_potential,
    propagator_csv,
    rpi_propagator,
)
from .monitoring import MonitoringChannel, ReadoutCurve
from .nonselective import (
    Form,
    IntegrationError,
    MasterEquationSpec,
    density_csv,
    expectation_table,
    integrate,
    sample_ensemble,
)
from .selective import propagate_conditioned, sample_readout

log = logging.getLogger("rpimon")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class System:
    """Operators and initial state resolved from a config."""

    def __init__(self, cfg: RunConfig):
        self.c = Constants(cfg.hbar)
        self.ops: dict[str, np.ndarray] = {}
        if cfg.system == "qubit":
            self.ops = {k: build_qubit(k) for k in ("sx", "sy", "sz", "id")}
            self.ops["zero"] = np.zeros((2, 2), dtype=complex)
            if cfg.H not in self.ops:
                raise ConfigError([f"config: qubit H must be one of {sorted(self.ops)}"])
            self.H = 0.5 * cfg.hbar * cfg.omega * self.ops[cfg.H]
            default_A, default_psi = "sz", "plus"
        elif cfg.system == "oscillator":
            q, p, H = build_oscillator(cfg.d, cfg.m, cfg.omega, self.c)
            self.ops = {"q": q, "p": p, "H": H, "zero": np.zeros_like(H)}
            self.H = H if cfg.H in ("zero", "H") else self._op(cfg.H)
            default_A, default_psi = "q", "coherent:1"
        else:
            try:
                with np.load(cfg.matrix_file) as data:
                    self.ops = {k: np.asarray(data[k], dtype=complex) for k in data.files}
            except (OSError, ValueError) as exc:
                raise OSError(f"cannot read matrix file {cfg.matrix_file}: {exc}") from exc
            self.H = self._op("H" if cfg.H == "zero" and "H" in self.ops else cfg.H)
            default_A, default_psi = "A", "basis:0"
        self.d = self.H.shape[0]
        self.A = self._op(cfg.A or default_A)
        B = self._op(cfg.B) * cfg.b_scale if cfg.B else None
        C = self._op(cfg.C) if cfg.C else None
        self.channel = MonitoringChannel(self.A, cfg.kappa, cfg.lam, B, C)
        self.psi0 = self._state(cfg.psi0 or default_psi)
        if cfg.system == "oscillator":
            self.observables = {"q": self.ops["q"], "p": self.ops["p"], "H": self.H}
        elif cfg.system == "qubit":
            self.observables = {k: self.ops[k] for k in ("sx", "sy", "sz")} | {"H": self.H}
        else:
            self.observables = {"A": self.A, "H": self.H}

    def _op(self, name: str) -> np.ndarray:
        if name not in self.ops:
            raise ConfigError([f"config: unknown operator {name!r}; available: {', '.join(sorted(self.ops))}"])
        return self.ops[name]

    def _state(self, spec: str) -> np.ndarray:
        if spec == "plus" and self.d == 2:
            return np.array([1, 1], dtype=complex) / np.sqrt(2)
        if spec in ("zero", "one") and self.d == 2:
            return fock_state(2, 0 if spec == "zero" else 1)
        kind, _, arg = spec.partition(":")
        try:
            if kind in ("fock", "basis"):
                return fock_state(self.d, int(arg))
            if kind == "coherent":
                return coherent_state(self.d, complex(arg))
        except ValueError as exc:
            raise ConfigError([f"config: bad psi0 {spec!r}: {exc}"]) from None
        if spec in self.ops:
            psi = np.asarray(self.ops[spec], dtype=complex).ravel()
            return psi / np.linalg.norm(psi)
        raise ConfigError([f"config: unknown psi0 {spec!r}"])


class Artifacts:
    """Writes output files, each starting with a provenance comment line."""

    def __init__(self, out_dir: Path, cfg: RunConfig):
        self.dir = out_dir
        self.header = f"rpimon {__version__} config_sha256={cfg.digest}"
        self.written: list[Path] = []

    def write(self, name: str, text: str):
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / name
        self.written.append(path)
        path.write_text(text)
        log.info("wrote %s", path)

    def write_json(self, name: str, record: dict):
        record = {"comment": self.header, **record}
        self.write(name, json.dumps(record, indent=1) + "\n")

    def discard(self):
        for path in self.written:
            path.unlink(missing_ok=True)


def _readout(cfg: RunConfig) -> ReadoutCurve:
    if cfg.file:
        try:
            return ReadoutCurve.from_csv(Path(cfg.file))
        except OSError as exc:
            raise OSError(f"cannot read readout file {cfg.file}: {exc}") from exc
    if cfg.values:
        dt = cfg.dt if cfg.dt else cfg.t_final / len(cfg.values)
        return ReadoutCurve(0.0, dt, np.array(cfg.values))
    return ReadoutCurve.constant(cfg.constant, cfg.n_steps, cfg.step)


def _form(cfg: RunConfig) -> Form:
    if cfg.form:
        return Form(cfg.form)
    return Form.SIMPLE if cfg.lam == 0 and cfg.C is None else Form.NONMINIMAL


def _expectation_csv(times, rhos, ops, header) -> str:
    table = expectation_table(rhos, ops)
    cols = [f"<{k}>" for k in ops] + ["abs_rho01", "purity", "trace"]
    data = [table[k] for k in ops] + [np.abs(rhos[:, 0, 1]), table["purity"], table["trace"]]
    lines = [f"# {header}", ",".join(["t"] + cols)]
    for k, t in enumerate(times):
        lines.append(",".join(f"{x:.17g}" for x in [t] + [col[k] for col in data]))
    return "\n".join(lines) + "\n"


def _rho_pairs(rhos) -> list:
    return [[[float(z.real), float(z.imag)] for z in r.ravel()] for r in rhos]


def run(cfg: RunConfig, out_dir: Path | None = None, threads: int = 1) -> int:
    """Execute one configured run; returns the process exit status."""
    out = Artifacts(Path(out_dir or cfg.output_dir), cfg)
    try:
        status = _dispatch(cfg, out, threads)
    except ConfigError as exc:
        out.discard()
        for e in exc.errors:
            print(e, file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, ValueError, np.linalg.LinAlgError) as exc:
        out.discard()
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        out.discard()
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return status


def _dispatch(cfg: RunConfig, out: Artifacts, threads: int) -> int:
    mode = cfg.mode
    if mode == "check":
        results = run_all(threads=threads)
        lines = [f"# {out.header}", "name,measured,tolerance,passed"]
        for r in results:
            lines.append(f"{r.name},{r.measured:.17g},{r.tolerance:.17g},{int(r.passed)}")
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<34} measured={r.measured:.3e}  tol={r.tolerance:.1e}")
        out.write("check_summary.csv", "\n".join(lines) + "\n")
        return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC

    if mode == "lattice":
        q = LatticeSpec(cfg.n_q, cfg.q_max, 1, cfg.dts[0], cfg.m).grid
        V = harmonic_potential(q, cfg.m, cfg.omega) if cfg.potential == "harmonic" else None
        spec = LatticeSpec(cfg.n_q, cfg.q_max, 1, cfg.dts[0], cfg.m, V)
        t_final = cfg.t_final or 1.0
        a = cfg.constant or 0.0
        c = Constants(cfg.hbar)
        rows = convergence_study(spec, t_final, cfg.dts, cfg.kappa, lambda t: np.full(len(t), a), c)
        out.write("convergence.csv", convergence_csv(rows, out.header))
        dt = cfg.dts[-1]
        n_t = int(round(t_final / dt))
        U = rpi_propagator(spec.with_dt(dt, n_t), ReadoutCurve.constant(a, n_t, dt), cfg.kappa, c)
        out.write("propagator.csv", propagator_csv(U, out.header))
        return EXIT_OK

    sysm = System(cfg)
    if mode == "selective":
        traj = propagate_conditioned(sysm.psi0, sysm.H, sysm.channel, _readout(cfg), sysm.c)
        out.write("trajectory.csv", traj.to_csv(out.header))
    elif mode == "sample":
        traj = sample_readout(sysm.psi0, sysm.H, sysm.channel, cfg.n_steps, cfg.step, cfg.seed, sysm.c)
        out.write("trajectory.csv", traj.to_csv(out.header))
        out.write("readout.csv", traj.readout.to_csv(out.header))
    elif mode == "ensemble":
        rhos = sample_ensemble(
            sysm.psi0, sysm.H, sysm.channel, cfg.n_steps, cfg.step, cfg.n_traj, cfg.seed, sysm.c, threads=threads
        )
        times = cfg.step * np.arange(cfg.n_steps + 1)
        spec = MasterEquationSpec(sysm.H, (sysm.channel,), _form(cfg))
        master = integrate(projector(sysm.psi0), spec, cfg.t_final, cfg.n_steps, sysm.c)
        dev = np.max(np.abs(rhos - master), axis=(1, 2))
        out.write_json(
            "ensemble.json",
            {
                "n_traj": cfg.n_traj,
                "seed": cfg.seed,
                "t_grid": times.tolist(),
                "rho_avg": _rho_pairs(rhos),
            },
        )
        out.write("ensemble_density.csv", density_csv(times, rhos, out.header))
        report = [f"# {out.header}", "t,deviation_max,stat_bound"]
        bound = 5 / np.sqrt(cfg.n_traj)
        report += [f"{t:.17g},{e:.17g},{bound:.17g}" for t, e in zip(times, dev)]
        out.write("ensemble_vs_master.csv", "\n".join(report) + "\n")
    elif mode == "master":
        spec = MasterEquationSpec(sysm.H, (sysm.channel,), _form(cfg), 1e-6 if cfg.system == "oscillator" else None)
        rhos = integrate(projector(sysm.psi0), spec, cfg.t_final, cfg.n_steps, sysm.c)
        times = cfg.step * np.arange(cfg.n_steps + 1)
        out.write("density.csv", density_csv(times, rhos, out.header))
        out.write("expectations.csv", _expectation_csv(times, rhos, sysm.observables, out.header))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rpimon", description="Continuous-measurement simulator (restricted path integrals).")
    ap.add_argument("config", type=Path, help="line-oriented key = value configuration file")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for ensemble runs")
    ap.add_argument("--out", type=Path, default=None, help="output directory (overrides output_dir)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text, args.overrides)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"{args.config}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
