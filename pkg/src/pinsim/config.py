"""Line-oriented run configuration: `section.key = value` per line.

Parsing validates everything it can and reports the full list of problems
(unknown key, type mismatch, duplicate key, missing required key), each
with line numbers, rather than stopping at the first.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

__all__ = ["RunConfig", "ConfigError", "parse_config", "EXPERIMENTS", "KEYS"]

EXPERIMENTS = ("sim", "psi", "uconv", "cg-check", "rege", "hc", "scan",
               "smoothing", "alpha-gt1")


class ConfigError(ValueError):
    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


def _as_bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _as_float_list(s: str):
    return [float(x) for x in s.replace(",", " ").split()]


def _as_int_list(s: str):
    out = []
    for x in s.replace(",", " ").split():
        v = float(x)
        if v != int(v):
            raise ValueError(f"not an integer: {x!r}")
        out.append(int(v))
    return out


_TYPES = {
    "int": int,
    "float": float,
    "str": str,
    "bool": _as_bool,
    "floats": _as_float_list,
    "ints": _as_int_list,
}

# key -> (type name, default, help); None default means "required when the
# experiment listed in _REQUIRED asks for it"
KEYS = {
    "experiment": ("str", None, "experiment kind (must match the subcommand)"),
    "seed": ("int", None, "global seed (required)"),
    "workers": ("int", 1, "worker processes"),
    "budget": ("float", 5e12, "cost cap in site-step units"),
    "replicas": ("int", 64, "disorder replicas"),
    "law.kind": ("str", "heavy", "heavy | deterministic | twopoint | contact"),
    "law.alpha": ("float", 0.75, "tail exponent of the return-time law"),
    "law.family": ("str", "const", "slowly varying family: const | logpow"),
    "law.param": ("float", 1.0, "family parameter"),
    "law.N_max": ("int", 20000, "return-time table size"),
    "law.nu": ("float", 0.5, "contact exponent (contact kind)"),
    "law.M": ("float", 10.0, "contact scale (contact kind)"),
    "disorder.kind": ("str", "gaussian",
                      "gaussian | uniform | rademacher | gammaexp"),
    "disorder.gamma": ("float", 1.5, "gamma-exp exponent in (1,2)"),
    "sim.beta_hat": ("float", 1.0, "disorder strength (hat units)"),
    "sim.h_hat": ("floats", [0.0], "bias grid (hat units), common disorder"),
    "sim.t": ("float", 1.0, "macroscopic horizon"),
    "sim.N": ("ints", [512], "lattice sizes"),
    "psi.nu": ("float", 0.5, "series exponent"),
    "psi.delta_hat": ("floats", [1.0], "series couplings"),
    "psi.t": ("floats", [1.0], "evaluation points"),
    "psi.tol": ("float", 1e-8, "series tolerance"),
    "uconv.delta_hat": ("float", 1.0, "coupling"),
    "uconv.t_grid": ("floats", [i / 16 for i in range(17)], "t grid"),
    "uconv.N_list": ("ints", [256, 1024, 4096], "lattice sizes"),
    "cg.N": ("ints", [4, 8], "blocks per unit"),
    "cg.t": ("ints", [2, 2], "horizons (paired with cg.N)"),
    "cg.beta": ("float", 0.4, "disorder strength"),
    "cg.h": ("float", 0.2, "bias"),
    "rege.alpha": ("floats", [0.5, 0.75], "stable exponents"),
    "rege.samples": ("int", 100000, "samples per estimate"),
    "rege.gammas": ("floats", [1 / 64, 1 / 32, 1 / 16, 1 / 8], "tail scales"),
    "hc.beta": ("floats", [0.0], "disorder strengths"),
    "hc.N": ("int", 4096, "lattice size"),
    "hc.kappa": ("float", 3.0, "stderr multiplier of the threshold rule"),
    "hc.c0": ("float", 2.0, "finite-size floor coefficient"),
    "hc.tol": ("float", 1e-4, "bisection tolerance on h"),
    "scan.beta_grid": ("floats", [0.1, 0.15, 0.225, 0.3, 0.4], "beta grid"),
    "scan.N": ("int", 4096, "lattice size"),
    "scan.kappa": ("float", 3.0, "threshold rule multiplier"),
    "scan.c0": ("float", 2.0, "finite-size floor coefficient"),
    "scan.tol": ("float", 1e-4, "bisection tolerance"),
    "smoothing.beta": ("float", 0.4, "disorder strength"),
    "smoothing.h_offsets": ("floats", [0.02, 0.05, 0.1, 0.2, 0.3],
                            "grid offsets above the h_c estimate"),
    "smoothing.N": ("int", 4096, "lattice size"),
    "ag1.beta_grid": ("floats", [0.1], "beta grid (alpha > 1 law)"),
    "ag1.N": ("int", 8192, "lattice size"),
    "ag1.tol": ("float", 1e-5, "bisection tolerance"),
}

_REQUIRED = {"seed"}

_GRID_KEYS = {"sim.h_hat", "sim.N", "psi.delta_hat", "psi.t", "uconv.t_grid",
              "uconv.N_list", "cg.N", "cg.t", "rege.alpha", "rege.gammas",
              "hc.beta", "scan.beta_grid", "smoothing.h_offsets",
              "ag1.beta_grid"}


@dataclass
class RunConfig:
    experiment: str
    values: dict = field(default_factory=dict)
    text: str = ""

    def __getitem__(self, key):
        if key in self.values:
            return self.values[key]
        return KEYS[key][1]

    @property
    def seed(self) -> int:
        return self["seed"]

    def hash(self) -> str:
        canon = "\n".join(f"{k}={self.values[k]!r}" for k in sorted(self.values))
        return hashlib.sha256((self.experiment + "\n" + canon).encode()).hexdigest()[:16]


def parse_config(text: str, experiment: str | None = None) -> RunConfig:
    """Parse and validate; raises ConfigError listing every problem found."""
    errors = []
    values: dict = {}
    seen: dict = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {ln}: expected 'key = value', got {raw!r}")
            continue
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key in seen:
            errors.append(f"line {ln}: duplicate key {key!r} "
                          f"(first set on line {seen[key]})")
            continue
        seen[key] = ln
        if key not in KEYS:
            errors.append(f"line {ln}: unknown key {key!r}")
            continue
        tname = KEYS[key][0]
        try:
            values[key] = _TYPES[tname](val)
        except (ValueError, TypeError):
            errors.append(f"line {ln}: key {key!r} expects {tname}, got {val!r}")
    exp = values.get("experiment", experiment)
    if exp is None:
        errors.append("missing required key 'experiment' "
                      "(or pass the experiment on the command line)")
    elif exp not in EXPERIMENTS:
        errors.append(f"unknown experiment {exp!r}; choose from {EXPERIMENTS}")
    elif experiment is not None and exp != experiment:
        errors.append(f"config experiment {exp!r} conflicts with "
                      f"command-line experiment {experiment!r}")
    for key in _REQUIRED:
        if key not in values:
            errors.append(f"missing required key {key!r}")
    for key in _GRID_KEYS:
        if key in values and len(values[key]) == 0:
            errors.append(f"key {key!r}: grid must be nonempty")
    if "budget" in values and values["budget"] <= 0:
        errors.append("key 'budget': must be positive")
    if errors:
        raise ConfigError(errors)
    return RunConfig(experiment=exp, values=values, text=text)
