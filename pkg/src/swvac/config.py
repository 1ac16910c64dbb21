"""Run configuration: flat key-value text with sections, strict keys."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, WeightField, build_grid, build_weight

Array = np.ndarray


class ConfigError(ValueError):
    pass


_KNOWN = {
    "grid": {"n1", "n2"},
    "weight": {"profile", "epsilon", "table"},
    "solver": {
        "n_modes",
        "dt",
        "t_final",
        "picard_tol",
        "max_iter",
        "scheme",
        "pressure",
        "truncation_order",
        "u0_profile",
        "u0_amplitude",
    },
    "output": {"directory", "seed"},
}

U0_PROFILES = ("zero", "sine-shear")


@dataclass(frozen=True)
class SolverConfig:
    n1: int = 32
    n2: int = 32
    profile: str = "sine"
    epsilon: float = 0.1
    table: str = ""
    n_modes: int = 32
    dt: float = 0.25 / 200
    t_final: float = 0.25
    picard_tol: float = 1e-8
    max_iter: int = 50
    scheme: str = "crank-nicolson"
    pressure: bool = True
    truncation_order: int = 4
    u0_profile: str = "sine-shear"
    u0_amplitude: float = 0.05
    directory: str = "out"
    seed: int = 1234
    raw_lines: tuple[str, ...] = field(default=())

    @property
    def n_steps(self) -> int:
        n = int(round(self.t_final / self.dt))
        return max(n, 1)

    def validate(self) -> None:
        if self.n1 < 4 or self.n2 < 4:
            raise ConfigError("grid sizes must be >= 4")
        if self.profile not in ("sine", "parabolic", "perturbed-sine", "tabulated"):
            raise ConfigError(f"unknown weight profile {self.profile!r}")
        if not 1 <= self.n_modes <= self.n1 * self.n2:
            raise ConfigError("n_modes must be in 1..ndof")
        if self.dt <= 0 or self.t_final <= 0:
            raise ConfigError("dt and t_final must be positive")
        if abs(self.n_steps * self.dt - self.t_final) > 1e-9 * self.t_final:
            raise ConfigError("t_final must be an integer multiple of dt")
        if self.scheme not in ("implicit-euler", "crank-nicolson"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if not 2 <= self.truncation_order <= 4:
            raise ConfigError("truncation_order must be in 2..4")
        if self.u0_profile not in U0_PROFILES:
            raise ConfigError(f"unknown u0 profile {self.u0_profile!r}")
        if not 0 < self.picard_tol < 1:
            raise ConfigError("picard_tol must be in (0, 1)")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")

    def build_domain(self) -> tuple[Grid, WeightField]:
        grid = build_grid(self.n1, self.n2)
        table = None
        if self.profile == "tabulated":
            if not self.table:
                raise ConfigError("tabulated profile requires a table path")
            table = np.loadtxt(self.table, delimiter=",")
        weight = build_weight(self.profile, grid, epsilon=self.epsilon, table=table)
        return grid, weight

    def initial_velocity(self, grid: Grid) -> Array:
        xx1, xx2 = grid.mesh()
        if self.u0_profile == "zero":
            return np.zeros((2,) + grid.shape)
        u1 = self.u0_amplitude * np.sin(2 * np.pi * xx1) * np.sin(np.pi * xx2)
        return np.stack([u1, np.zeros_like(u1)])


def _get(parser: configparser.ConfigParser, section: str, key: str, cast, default):
    if parser.has_option(section, key):
        raw = parser.get(section, key)
        try:
            if cast is bool:
                if raw.lower() in ("on", "true", "yes", "1"):
                    return True
                if raw.lower() in ("off", "false", "no", "0"):
                    return False
                raise ValueError(raw)
            return cast(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from exc
    return default


def load_config(path: str) -> SolverConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    for section in parser.sections():
        if section not in _KNOWN:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser.options(section):
            if key not in _KNOWN[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
    with open(path) as f:
        raw_lines = tuple(line.rstrip("\n") for line in f)
    defaults = SolverConfig()
    cfg = SolverConfig(
        n1=_get(parser, "grid", "n1", int, defaults.n1),
        n2=_get(parser, "grid", "n2", int, defaults.n2),
        profile=_get(parser, "weight", "profile", str, defaults.profile),
        epsilon=_get(parser, "weight", "epsilon", float, defaults.epsilon),
        table=_get(parser, "weight", "table", str, defaults.table),
        n_modes=_get(parser, "solver", "n_modes", int, defaults.n_modes),
        dt=_get(parser, "solver", "dt", float, defaults.dt),
        t_final=_get(parser, "solver", "t_final", float, defaults.t_final),
        picard_tol=_get(parser, "solver", "picard_tol", float, defaults.picard_tol),
        max_iter=_get(parser, "solver", "max_iter", int, defaults.max_iter),
        scheme=_get(parser, "solver", "scheme", str, defaults.scheme),
        pressure=_get(parser, "solver", "pressure", bool, defaults.pressure),
        truncation_order=_get(parser, "solver", "truncation_order", int, defaults.truncation_order),
        u0_profile=_get(parser, "solver", "u0_profile", str, defaults.u0_profile),
        u0_amplitude=_get(parser, "solver", "u0_amplitude", float, defaults.u0_amplitude),
        directory=_get(parser, "output", "directory", str, defaults.directory),
        seed=_get(parser, "output", "seed", int, defaults.seed),
        raw_lines=raw_lines,
    )
    cfg.validate()
    return cfg
