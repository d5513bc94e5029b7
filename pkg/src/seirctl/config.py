"""Run configuration: flat key = value files, presets, environment overrides.

A run is described by one flat mapping.  Values merge in precedence order
preset < config file < SEIRCTL_* environment variables < CLI flags, and the
merged mapping is validated once into an immutable RunConfig.
"""

from __future__ import annotations

import datetime as _dt
import importlib.resources
import os
from dataclasses import dataclass

import numpy as np

from .control import ADJOINT_FORMS, CostWeights, FbsmOptions
from .errors import ConfigError
from .fit import DEFAULT_LOWER, DEFAULT_UPPER, VAR_NAMES, FitOptions
from .model import ControlBounds, ControlVec, ModelParams, PARAM_NAMES

__all__ = [
    "RunConfig",
    "ENV_PREFIX",
    "CONFIG_KEYS",
    "parse_kv_file",
    "parse_kv_text",
    "available_presets",
    "load_preset",
    "merge_sources",
    "build_config",
]

ENV_PREFIX = "SEIRCTL_"

_DATE_KEYS = ("start_date", "end_date", "data_end")
_FLOAT_KEYS = (
    "step",
    "n_population",
    "p0",
    "e0",
    "i0",
    "q0",
    "r0",
    "d0",
    "w1",
    "w2",
    "w3",
    "v1",
    "v2",
    "v3",
    "u1_min",
    "u1_max",
    "u2_min",
    "u2_max",
    "u3_min",
    "u3_max",
    "fbsm_relaxation",
    "fbsm_tol",
    "fit_grad_tol",
    "fit_step_tol",
    "fit_cost_tol",
    "fit_damping",
    "fit_fd_step",
)
_INT_KEYS = ("fbsm_max_iter", "fit_max_iter")
_STR_KEYS = ("fbsm_adjoint_form", "data_path", "series_path", "out_dir", "report_days")

CONFIG_KEYS = frozenset(
    _DATE_KEYS
    + _FLOAT_KEYS
    + _INT_KEYS
    + _STR_KEYS
    + PARAM_NAMES
    + tuple(f"fit_guess_{name}" for name in VAR_NAMES)
    + tuple(f"fit_lower_{name}" for name in VAR_NAMES)
    + tuple(f"fit_upper_{name}" for name in VAR_NAMES)
)

_REQUIRED = ("start_date", "end_date", "n_population", "e0", "i0") + PARAM_NAMES


def parse_kv_text(text: str, origin: str = "<config>") -> dict:
    """Parse flat `key = value` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_kv_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_kv_text(text, origin=str(path))


def available_presets() -> tuple:
    root = importlib.resources.files("seirctl") / "presets"
    return tuple(
        sorted(p.name[: -len(".cfg")] for p in root.iterdir() if p.name.endswith(".cfg"))
    )


def load_preset(name: str) -> dict:
    resource = importlib.resources.files("seirctl") / "presets" / f"{name}.cfg"
    if not resource.is_file():
        known = ", ".join(available_presets())
        raise ConfigError(f"unknown preset {name!r}; available: {known}")
    return parse_kv_text(resource.read_text(encoding="utf-8"), origin=f"preset:{name}")


def env_overrides(environ=None) -> dict:
    """Pick SEIRCTL_<KEY> variables out of the process environment."""
    if environ is None:
        environ = os.environ
    out = {}
    for key in CONFIG_KEYS:
        val = environ.get(ENV_PREFIX + key.upper())
        if val is not None:
            out[key] = val
    return out


def merge_sources(*mappings) -> dict:
    merged = {}
    for mapping in mappings:
        merged.update(mapping)
    return merged


@dataclass(frozen=True)
class RunConfig:
    """Validated, immutable description of one run."""

    start_date: _dt.date
    end_date: _dt.date
    data_end: _dt.date
    step: float
    n_population: float
    p0: float
    params: ModelParams
    e0: float
    i0: float
    q0: float | None
    r0: float | None
    d0: float | None
    weights: CostWeights
    bounds: ControlBounds
    fbsm: FbsmOptions
    fit_guess: np.ndarray | None
    fit_lower: np.ndarray
    fit_upper: np.ndarray
    fit_options: FitOptions
    report_dates: tuple
    data_path: str | None
    series_path: str | None
    out_dir: str

    @property
    def horizon_days(self) -> float:
        return float((self.end_date - self.start_date).days)

    @property
    def data_window(self) -> tuple:
        return (self.start_date, self.data_end)


def _to_date(key: str, raw: str) -> _dt.date:
    try:
        return _dt.date.fromisoformat(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected ISO date, got {raw!r}") from exc


def _to_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from exc


def _to_int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from exc


def build_config(mapping: dict) -> RunConfig:
    """Validate a merged flat mapping into a RunConfig."""
    unknown = set(mapping) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    missing = [k for k in _REQUIRED if k not in mapping]
    if missing:
        raise ConfigError(f"missing required keys: {missing}")

    def date(key, default=None):
        return _to_date(key, mapping[key]) if key in mapping else default

    def num(key, default=None):
        return _to_float(key, str(mapping[key])) if key in mapping else default

    def integer(key, default=None):
        return _to_int(key, str(mapping[key])) if key in mapping else default

    start = date("start_date")
    end = date("end_date")
    if end < start:
        raise ConfigError(f"end_date {end} precedes start_date {start}")
    data_end = date("data_end", end)
    if not (start <= data_end <= end):
        raise ConfigError(f"data_end {data_end} outside [{start}, {end}]")

    step = num("step", 0.1)
    if step <= 0:
        raise ConfigError(f"step must be positive, got {step}")
    n_pop = num("n_population")
    if n_pop <= 0:
        raise ConfigError(f"n_population must be positive, got {n_pop}")

    try:
        params = ModelParams(*(num(name) for name in PARAM_NAMES))
        weights = CostWeights(
            w1=num("w1", 1.0), w2=num("w2", 1.0), w3=num("w3", 1.0),
            v1=num("v1", 1.0), v2=num("v2", 1.0), v3=num("v3", 1.0),
        )
        bounds = ControlBounds(
            ControlVec(num("u1_min", 0.1), num("u2_min", 0.0), num("u3_min", 0.0)),
            ControlVec(num("u1_max", 1.0), num("u2_max", 1.0), num("u3_max", 1.0)),
        )
        form = str(mapping.get("fbsm_adjoint_form", "printed"))
        if form not in ADJOINT_FORMS:
            raise ConfigError(
                f"fbsm_adjoint_form must be one of {sorted(ADJOINT_FORMS)}, got {form!r}"
            )
        fbsm = FbsmOptions(
            relaxation=num("fbsm_relaxation", 0.5),
            tol_rel=num("fbsm_tol", 1e-4),
            max_iter=integer("fbsm_max_iter", 500),
            adjoint_form=form,
        )
        fit_options = FitOptions(
            max_iter=integer("fit_max_iter", 200),
            grad_tol=num("fit_grad_tol", 1e-8),
            step_tol=num("fit_step_tol", 1e-10),
            cost_tol=num("fit_cost_tol", 1e-6),
            damping=num("fit_damping", 1e-3),
            fd_step=num("fit_fd_step", 1e-6),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    guess_keys = [f"fit_guess_{name}" for name in VAR_NAMES]
    have_guess = [k for k in guess_keys if k in mapping]
    if have_guess and len(have_guess) != len(guess_keys):
        absent = sorted(set(guess_keys) - set(have_guess))
        raise ConfigError(f"incomplete fit guess, missing {absent}")
    fit_guess = (
        np.array([num(k) for k in guess_keys], dtype=float) if have_guess else None
    )

    fit_lower = np.array(
        [num(f"fit_lower_{name}", DEFAULT_LOWER[i]) for i, name in enumerate(VAR_NAMES)]
    )
    fit_upper = np.array(
        [num(f"fit_upper_{name}", DEFAULT_UPPER[i]) for i, name in enumerate(VAR_NAMES)]
    )
    if np.any(fit_lower > fit_upper):
        raise ConfigError("fit_lower exceeds fit_upper for some variable")

    report_dates = ()
    if "report_days" in mapping:
        try:
            report_dates = tuple(
                _dt.date.fromisoformat(tok.strip())
                for tok in str(mapping["report_days"]).split(",")
                if tok.strip()
            )
        except ValueError as exc:
            raise ConfigError(f"report_days: {exc}") from exc
        if any(b <= a for a, b in zip(report_dates, report_dates[1:])):
            raise ConfigError("report_days must be strictly increasing dates")

    return RunConfig(
        start_date=start,
        end_date=end,
        data_end=data_end,
        step=step,
        n_population=n_pop,
        p0=num("p0", 0.0),
        params=params,
        e0=num("e0"),
        i0=num("i0"),
        q0=num("q0"),
        r0=num("r0"),
        d0=num("d0"),
        weights=weights,
        bounds=bounds,
        fbsm=fbsm,
        fit_guess=fit_guess,
        fit_lower=fit_lower,
        fit_upper=fit_upper,
        fit_options=fit_options,
        report_dates=report_dates,
        data_path=mapping.get("data_path"),
        series_path=mapping.get("series_path"),
        out_dir=str(mapping.get("out_dir", "outputs")),
    )
