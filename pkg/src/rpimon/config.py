"""Line-oriented run configuration.

Format::

    # comment
    [run]
    mode = master
    [channel]
    A = sz
    kappa = 1

Keys may appear before any section header; a key placed under a different
section than its own is an error. All problems are collected and reported
together, each with its line number.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

MODES = ("selective", "sample", "ensemble", "master", "lattice", "check")
SYSTEMS = ("qubit", "oscillator", "custom")
FORMS = ("simple", "nonminimal", "lindblad_canonical")
POTENTIALS = ("free", "harmonic")


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


# key -> (section, parser)
SCHEMA = {
    "mode": ("run", str),
    "system": ("run", str),
    "seed": ("run", int),
    "n_traj": ("run", int),
    "output_dir": ("run", str),
    "d": ("system", int),
    "m": ("system", float),
    "omega": ("system", float),
    "hbar": ("system", float),
    "H": ("system", str),
    "matrix_file": ("system", str),
    "psi0": ("system", str),
    "A": ("channel", str),
    "kappa": ("channel", float),
    "lambda": ("channel", float),
    "B": ("channel", str),
    "b_scale": ("channel", float),
    "C": ("channel", str),
    "t_final": ("numerics", float),
    "n_steps": ("numerics", int),
    "dt": ("numerics", float),
    "form": ("numerics", str),
    "values": ("readout", _floats),
    "file": ("readout", str),
    "constant": ("readout", float),
    "n_q": ("lattice", int),
    "q_max": ("lattice", float),
    "potential": ("lattice", str),
    "dts": ("lattice", _floats),
}
_KIND = {int: "an integer", float: "a number", str: "text", _floats: "a comma-separated list of numbers"}
SECTIONS = {sec for sec, _ in SCHEMA.values()}

# keys with no effect on results; excluded from the config hash
_HASH_EXCLUDED = {"output_dir"}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    mode: str = "check"
    system: str = "qubit"
    seed: int | None = None
    n_traj: int = 1
    output_dir: str = "out"
    d: int = 16
    m: float = 1.0
    omega: float = 1.0
    hbar: float = 1.0
    H: str = "zero"
    matrix_file: str | None = None
    psi0: str | None = None
    A: str | None = None
    kappa: float = 1.0
    lam: float = 0.0
    B: str | None = None
    b_scale: float = 1.0
    C: str | None = None
    t_final: float | None = None
    n_steps: int | None = None
    dt: float | None = None
    form: str | None = None
    values: tuple | None = None
    file: str | None = None
    constant: float | None = None
    n_q: int = 101
    q_max: float = 5.0
    potential: str = "free"
    dts: tuple = (1 / 25, 1 / 50, 1 / 100, 1 / 200)

    def canonical(self) -> str:
        """Stable text of every field that can affect results."""
        lines = []
        for f in fields(self):
            if f.name in _HASH_EXCLUDED:
                continue
            lines.append(f"{f.name}={getattr(self, f.name)!r}")
        return "\n".join(lines)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    @property
    def step(self) -> float:
        return self.t_final / self.n_steps


def _attr(key: str) -> str:
    return "lam" if key == "lambda" else key


def _split_override(item: str):
    if "=" not in item:
        raise ConfigError([f"--set {item!r}: expected key=value"])
    key, value = (s.strip() for s in item.split("=", 1))
    if "." in key:
        key = key.split(".", 1)[1]
    return key, value


def parse_config(text: str, overrides=()) -> RunConfig:
    """Parse and validate; raises :class:`ConfigError` listing every problem."""
    errors: list[str] = []
    raw: dict[str, tuple[str, int]] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            if section not in SECTIONS:
                errors.append(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in s:
            errors.append(f"line {lineno}: expected 'key = value', got {s!r}")
            continue
        key, value = (x.strip() for x in s.split("=", 1))
        if key not in SCHEMA:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        home = SCHEMA[key][0]
        if section is not None and section in SECTIONS and section != home:
            errors.append(f"line {lineno}: key {key!r} belongs in [{home}], not [{section}]")
            continue
        if key in raw:
            errors.append(f"line {lineno}: duplicate key {key!r} (first on line {raw[key][1]})")
            continue
        raw[key] = (value, lineno)
    for item in overrides:
        try:
            key, value = _split_override(item)
        except ConfigError as exc:
            errors.extend(exc.errors)
            continue
        if key not in SCHEMA:
            errors.append(f"--set: unknown key {key!r}")
            continue
        raw[key] = (value, 0)

    def where(key):
        n = raw[key][1]
        return f"line {n}" if n else "--set"

    values = {}
    for key, (value, _) in raw.items():
        parser = SCHEMA[key][1]
        try:
            values[_attr(key)] = parser(value)
        except ValueError:
            errors.append(f"{where(key)}: {key} must be {_KIND[parser]}, got {value!r}")

    def bad(key, msg):
        errors.append(f"{where(key) if key in raw else 'config'}: {msg}")

    def check(key, ok, msg):
        attr = _attr(key)
        if attr in values and not ok(values[attr]):
            bad(key, msg)

    check("mode", lambda v: v in MODES, f"mode must be one of {', '.join(MODES)}")
    check("system", lambda v: v in SYSTEMS, f"system must be one of {', '.join(SYSTEMS)}")
    check("form", lambda v: v in FORMS, f"form must be one of {', '.join(FORMS)}")
    check("potential", lambda v: v in POTENTIALS, f"potential must be one of {', '.join(POTENTIALS)}")
    check("kappa", lambda v: v >= 0, "kappa must be ≥ 0")
    check("n_traj", lambda v: v >= 1, "n_traj must be ≥ 1")
    check("n_steps", lambda v: v >= 1, "n_steps must be ≥ 1")
    check("d", lambda v: 2 <= v <= 64, "d must be in [2, 64]")
    for k in ("m", "omega", "hbar", "t_final", "dt", "q_max"):
        check(k, lambda v: v > 0, f"{k} must be > 0")
    check("n_q", lambda v: v >= 3 and v % 2 == 1, "n_q must be odd and ≥ 3")
    check("dts", lambda v: len(v) > 0 and all(x > 0 for x in v), "dts must be positive")
    check("seed", lambda v: v >= 0, "seed must be ≥ 0")

    mode = values.get("mode", "check")
    system = values.get("system", "qubit")
    if system == "custom" and "matrix_file" not in values:
        bad("system", "system = custom requires matrix_file")

    # step grid: any two of t_final, n_steps, dt
    t, n, dt = values.get("t_final"), values.get("n_steps"), values.get("dt")
    if t is not None and n is None and dt is not None and dt > 0:
        n = round(t / dt)
        if n < 1 or abs(n * dt - t) > 1e-9 * t:
            bad("dt", "dt must divide t_final")
        else:
            values["n_steps"] = n
    elif t is None and n is not None and dt is not None:
        values["t_final"] = n * dt
    elif t is not None and n is not None and dt is not None and n > 0:
        if abs(t / n - dt) > 1e-12 * dt:
            bad("dt", "dt disagrees with t_final / n_steps")

    needs_seed = mode in ("sample", "ensemble")
    if needs_seed and "seed" not in values:
        errors.append(f"config: mode = {mode} requires missing key 'seed'")
    if mode in ("sample", "ensemble", "master"):
        for key in ("t_final", "n_steps"):
            if values.get(key) is None:
                errors.append(f"config: mode = {mode} requires missing key {key!r} (or 'dt')")
    if mode in ("sample", "ensemble") and values.get("kappa", 1.0) == 0:
        bad("kappa", f"mode = {mode} requires kappa > 0")
    if mode == "selective":
        given = [k for k in ("values", "file", "constant") if k in values]
        if not given:
            errors.append("config: mode = selective requires a readout: missing key 'values', 'file' or 'constant'")
        elif len(given) > 1:
            errors.append(f"config: readout given twice ({', '.join(given)})")
        if "constant" in values and values.get("n_steps") is None:
            errors.append("config: readout 'constant' requires missing key 'n_steps'")
        if "values" in values and values.get("dt") is None and values.get("t_final") is None:
            errors.append("config: readout 'values' requires missing key 'dt' or 't_final'")
    if values.get("lam", 0.0) != 0 and "B" not in values:
        bad("lambda", "lambda != 0 requires key 'B'")
    if values.get("form") == "simple" and values.get("lam", 0.0) != 0:
        bad("form", "form = simple requires lambda = 0")
    if values.get("form") == "lindblad_canonical" and values.get("kappa", 1.0) == 0:
        bad("form", "form = lindblad_canonical requires kappa > 0")

    if errors:
        raise ConfigError(errors)
    return RunConfig(**values)
