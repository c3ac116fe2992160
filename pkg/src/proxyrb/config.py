"""Run configuration: a flat INI-style key-value file with one section per
concern.  Unknown sections and keys are rejected before any compute runs.

Grammar (configparser syntax)::

    [run]
    problem = laplace_bie | rte | synthetic_affine
    seed = 0
    out = ./out
    jobs = 1

    [thresholds]
    epsilon = 1e-3            ; or a comma-separated list for sweeps
    eta = 1.5

    [pipeline]
    enrich = true
    append_solutions = true
    operator_columns = auto   ; or an integer count of operator columns
    rhs_mode = default        ; or direct | interpolated

    [laplace_bie]
    kappa = 0.4
    x0 = 0.6, 0.0
    n_radial = 8
    n_fine = 512
    n_coarse = 64
    samples = 256

    [rte]
    n_fine = 32
    n_coarse = 16
    grid_n = 6
    amplitudes = 2, 6, 10
    widths = 0.2, 0.4, 0.6
    line_quadrature = 16
    gaussian_sign = +

    [synthetic_affine]
    dimension = 64
    rank = 3
    samples = 200
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .oracle import Problem
from .problems import (
    AffineConfig,
    AffineFamilyProblem,
    BieConfig,
    LaplaceBieProblem,
    RteConfig,
    TransportProblem,
)

__all__ = ["ConfigError", "RunConfig", "load_config", "build_problem"]

PROBLEM_NAMES = ("laplace_bie", "rte", "synthetic_affine")

_ALLOWED_KEYS = {
    "run": {"problem", "seed", "out", "jobs"},
    "thresholds": {"epsilon", "eta"},
    "pipeline": {"enrich", "append_solutions", "operator_columns", "rhs_mode"},
    "laplace_bie": {"kappa", "x0", "n_radial", "n_fine", "n_coarse", "samples"},
    "rte": {
        "n_fine",
        "n_coarse",
        "grid_n",
        "amplitudes",
        "widths",
        "line_quadrature",
        "gaussian_sign",
    },
    "synthetic_affine": {"dimension", "rank", "samples"},
}


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    problem: str
    epsilons: list[float]
    eta: float = 1.5
    seed: int = 0
    out: Path = Path("out")
    jobs: int = 1
    enrich: bool = True
    append_solutions: bool = True
    operator_columns: int | None = None
    rhs_mode: str = "default"
    driver: dict = field(default_factory=dict)


def _parse_bool(text: str, key: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"key '{key}' expects a boolean, got {text!r}")


def _parse_floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    for section in parser.sections():
        if section not in _ALLOWED_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        extra = set(parser[section]) - _ALLOWED_KEYS[section]
        if extra:
            raise ConfigError(
                f"unknown keys in [{section}]: {', '.join(sorted(extra))}"
            )

    if "run" not in parser or "problem" not in parser["run"]:
        raise ConfigError("config must set problem in a [run] section")
    problem = parser["run"]["problem"].strip()
    if problem not in PROBLEM_NAMES:
        raise ConfigError(
            f"unknown problem {problem!r}; choose one of {', '.join(PROBLEM_NAMES)}"
        )
    for section in parser.sections():
        if section in PROBLEM_NAMES and section != problem:
            raise ConfigError(
                f"config section [{section}] does not match problem {problem!r}"
            )

    cfg = RunConfig(problem=problem, epsilons=[1e-3])
    run = parser["run"]
    cfg.seed = run.getint("seed", 0)
    cfg.jobs = run.getint("jobs", 1)
    cfg.out = Path(run.get("out", "out"))

    if "thresholds" in parser:
        th = parser["thresholds"]
        if "epsilon" in th:
            cfg.epsilons = _parse_floats(th["epsilon"])
            if not cfg.epsilons:
                raise ConfigError("epsilon list is empty")
        if "eta" in th:
            cfg.eta = th.getfloat("eta")
    for eps in cfg.epsilons:
        if not 0.0 < eps < 1.0:
            raise ConfigError(f"epsilon values must lie in (0, 1), got {eps}")

    if "pipeline" in parser:
        pl = parser["pipeline"]
        if "enrich" in pl:
            cfg.enrich = _parse_bool(pl["enrich"], "enrich")
        if "append_solutions" in pl:
            cfg.append_solutions = _parse_bool(pl["append_solutions"], "append_solutions")
        if "operator_columns" in pl:
            raw = pl["operator_columns"].strip()
            if raw != "auto":
                try:
                    cfg.operator_columns = int(raw)
                except ValueError as exc:
                    raise ConfigError(
                        f"operator_columns expects 'auto' or an integer, got {raw!r}"
                    ) from exc
                if cfg.operator_columns < 1:
                    raise ConfigError("operator_columns must be at least 1")
        if "rhs_mode" in pl:
            mode = pl["rhs_mode"].strip()
            if mode not in ("default", "direct", "interpolated"):
                raise ConfigError(f"invalid rhs_mode {mode!r}")
            cfg.rhs_mode = mode

    if problem in parser:
        cfg.driver = dict(parser[problem])
    return cfg


def _driver_value(driver: dict, key: str, cast, default):
    if key not in driver:
        return default
    try:
        return cast(driver[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for '{key}': {driver[key]!r}") from exc


def build_problem(cfg: RunConfig) -> Problem:
    """Instantiate the configured driver, applying rhs_mode overrides."""
    d = cfg.driver
    try:
        if cfg.problem == "laplace_bie":
            x0 = _driver_value(d, "x0", _parse_floats, [0.6, 0.0])
            if len(x0) != 2:
                raise ConfigError("x0 expects two coordinates")
            problem: Problem = LaplaceBieProblem(
                BieConfig(
                    kappa=_driver_value(d, "kappa", float, 0.4),
                    x0=(x0[0], x0[1]),
                    n_radial=_driver_value(d, "n_radial", int, 8),
                    n_fine=_driver_value(d, "n_fine", int, 512),
                    n_coarse=_driver_value(d, "n_coarse", int, 64),
                    n_samples=_driver_value(d, "samples", int, 256),
                    seed=cfg.seed,
                )
            )
        elif cfg.problem == "rte":
            sign = _driver_value(d, "gaussian_sign", str, "+").strip()
            problem = TransportProblem(
                RteConfig(
                    n_fine=_driver_value(d, "n_fine", int, 32),
                    n_coarse=_driver_value(d, "n_coarse", int, 16),
                    grid_n=_driver_value(d, "grid_n", int, 6),
                    amplitudes=tuple(
                        _driver_value(d, "amplitudes", _parse_floats, [2.0, 6.0, 10.0])
                    ),
                    widths=tuple(
                        _driver_value(d, "widths", _parse_floats, [0.2, 0.4, 0.6])
                    ),
                    line_quadrature=_driver_value(d, "line_quadrature", int, 16),
                    gaussian_sign=sign,
                )
            )
        else:
            problem = AffineFamilyProblem(
                AffineConfig(
                    dimension=_driver_value(d, "dimension", int, 64),
                    rank=_driver_value(d, "rank", int, 3),
                    n_samples=_driver_value(d, "samples", int, 200),
                    seed=cfg.seed,
                )
            )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.rhs_mode != "default":
        problem.rhs_mode = cfg.rhs_mode
    return problem
