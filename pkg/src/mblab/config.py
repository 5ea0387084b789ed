"""
Run configuration: a flat ``section.key = value`` text file.

Blank lines and lines starting with ``#`` are ignored.  Lists are comma
separated; ``none`` clears an optional value.  Every key must appear in
:data:`SCHEMA`; anything else is rejected with its line number.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .grid import GridSpec
from .potential import Potential, make_potential
from .solvers import TransitionSpec

__all__ = ["SCHEMA", "RunConfig", "parse_config", "load_config"]


def _int_list(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_list(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _opt(conv):
    def parse(text: str):
        return None if text.strip().lower() == "none" else conv(text)
    parse.__name__ = f"optional {conv.__name__}"
    return parse


# key -> (parser, default)
SCHEMA = {
    "potential.family": (str, "pendulum_modulated"),
    "potential.epsilon": (_opt(float), None),
    "potential.offset": (float, 0.0),
    "grid.n": (int, 1),
    "grid.N": (int, 32),
    "grid.a": (int, -15),
    "grid.b": (int, 57),
    "grid.pad": (int, 10),
    "grid.hetero_a": (int, -20),
    "grid.hetero_b": (int, 20),
    "spec.K": (int, 1),
    "spec.m": (_int_list, (0, 12, 30, 42)),
    "spec.l": (_int_list, (4, 4, 4, 4)),
    "spec.rho": (_float_list, (0.1,)),
    "spec.alphabet_size": (_opt(int), 1),
    "solver.gtol": (_opt(float), None),
    "solver.max_iters": (int, 300),
    "solver.penalty_schedule": (_float_list, (1e2, 1e4, 1e6, 1e8)),
    "solver.feas_tol": (float, 1e-8),
    "solver.stop_after": (_opt(int), None),
    "infinite.mode": (str, "bilateral"),
    "infinite.K_list": (_int_list, (1, 2, 3)),
    "infinite.window": (_int_list, (18, 22)),
    "infinite.period": (_opt(int), None),
    "verify.local_trials": (int, 20),
    "verify.C1_samples": (int, 200),
    "seed": (int, 0),
}

# keys that do not change results
_VOLATILE = {"solver.stop_after"}


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {k: d for k, (_, d) in SCHEMA.items()})

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key: str, text: str, where: str = "override") -> None:
        if key not in SCHEMA:
            raise ConfigurationError(f"{where}: unknown key {key!r}")
        conv = SCHEMA[key][0]
        try:
            self.values[key] = conv(text.strip())
        except ValueError as err:
            raise ConfigurationError(f"{where}: bad value for {key!r}: {err}") from None

    def potential(self) -> Potential:
        return make_potential(self["potential.family"], self["potential.epsilon"],
                              self["potential.offset"])

    def grid(self) -> GridSpec:
        return GridSpec(self["grid.n"], self["grid.a"], self["grid.b"], self["grid.N"])

    def hetero_grid(self) -> GridSpec:
        return GridSpec(self["grid.n"], self["grid.hetero_a"], self["grid.hetero_b"], self["grid.N"])

    def spec(self) -> TransitionSpec:
        K = self["spec.K"]
        rho = self["spec.rho"]
        if len(rho) == 1:
            rho = rho * (4 * K)
        return TransitionSpec(K, self["spec.m"], self["spec.l"], rho, self["spec.alphabet_size"])

    def solver_kw(self) -> dict:
        return {"gtol": self["solver.gtol"], "max_iters": self["solver.max_iters"],
                "penalty_schedule": self["solver.penalty_schedule"],
                "feas_tol": self["solver.feas_tol"]}

    def validate(self) -> "RunConfig":
        self.potential()
        self.grid()
        self.hetero_grid()
        self.spec().validate()
        if self["infinite.mode"] not in ("right", "left", "bilateral"):
            raise ConfigurationError("infinite.mode must be right, left or bilateral")
        if len(self["infinite.window"]) != 2:
            raise ConfigurationError("infinite.window needs two tile indices")
        return self

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self.values.items()}

    def to_text(self) -> str:
        lines = []
        for k, v in self.values.items():
            if v is None:
                s = "none"
            elif isinstance(v, tuple):
                s = ",".join(repr(x) for x in v)
            else:
                s = repr(v) if isinstance(v, float) else str(v)
            lines.append(f"{k} = {s}")
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in _VOLATILE}
        text = json.dumps(d, sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def parse_config(text: str, overrides=(), source: str = "<config>") -> RunConfig:
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        cfg.set(key, val, f"{source}:{lineno}")
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"--set {item!r}: expected key=value")
        key, val = item.split("=", 1)
        cfg.set(key.strip(), val, f"--set {key.strip()}")
    return cfg.validate()


def load_config(path: str | Path | None, overrides=()) -> RunConfig:
    if path is None:
        return parse_config("", overrides)
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigurationError(f"cannot read config {path}: {err}") from None
    return parse_config(text, overrides, str(path))
