"""Experiment configuration read from JSON.

Unknown keys and invalid values are reported with their field path, e.g.
``scenario.correlation.spacing: must be positive``.
"""
import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from ..correlation import CorrelationModel
from ..mimo.network import MimoScenario

__all__ = ["ConfigError", "ExperimentConfig", "AXES", "ESTIMATORS", "SIMULABLE", "default_grid"]

AXES = ("r", "rate", "pilots", "csi_noise")
ESTIMATORS = ("mmse", "opt", "ign", "hl", "shl", "digital")
SIMULABLE = ("mmse", "hl", "shl", "digital")


class ConfigError(ValueError):
    def __init__(self, path, msg):
        super().__init__(f"{path}: {msg}")
        self.path = path


def default_grid(axis):
    if axis == "rate":
        return tuple(np.round(np.arange(0.5, 8.0 + 1e-9, 0.25), 10).tolist())
    if axis == "r":
        return tuple(np.round(np.arange(0.05, 1.0 + 1e-9, 0.05), 10).tolist())
    if axis == "pilots":
        return tuple(range(10, 101, 10))
    if axis == "csi_noise":
        return tuple(np.round(np.arange(0.0, 0.2 + 1e-9, 0.02), 10).tolist())
    raise ConfigError("axis", f"unknown axis {axis!r}; choose from {', '.join(AXES)}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a sweep.

    ``rate`` is the fixed rate for the ``r``, ``pilots`` and ``csi_noise``
    axes.  ``hl_ratio`` / ``spatial_ratio`` fix the combining ratios; when
    ``None`` they follow ``min(N_U/τ, R/2)`` and ``min(1, R/2)``.  On the
    ``r`` axis both systems use the axis value.  ``simulate`` lists the
    estimators that are also evaluated by Monte-Carlo; the ``csi_noise``
    axis is simulation only and ``csi_draws`` sets the number of noisy
    attenuation draws per network.
    """

    scenario: MimoScenario = field(default_factory=MimoScenario)
    axis: str = "rate"
    grid: tuple = None
    network_draws: int = 100
    mc_trials: int = 100
    seed: int = 0
    estimators: tuple = ESTIMATORS
    simulate: tuple = ()
    rate: float = 2.0
    hl_ratio: float = None
    spatial_ratio: float = None
    eta: float = 2.0
    csi_draws: int = 1
    dither: bool = True
    out: str = None

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError("axis", f"unknown axis {self.axis!r}; choose from {', '.join(AXES)}")
        grid = default_grid(self.axis) if self.grid is None else tuple(self.grid)
        if len(grid) == 0:
            raise ConfigError("grid", "must be nonempty")
        try:
            g = np.asarray(grid, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError("grid", "must contain numbers") from None
        if not np.all(np.isfinite(g)):
            raise ConfigError("grid", "must be finite")
        if np.any(np.diff(g) <= 0):
            raise ConfigError("grid", "must be strictly increasing")
        if self.axis == "pilots":
            if np.any(g != np.round(g)) or np.any(g < self.scenario.n_users):
                raise ConfigError("grid", "pilot lengths must be integers >= n_users")
            grid = tuple(int(x) for x in g)
        elif self.axis == "r" and (g[0] <= 0 or g[-1] > 1):
            raise ConfigError("grid", "ratios must lie in (0, 1]")
        elif np.any(g < 0):
            raise ConfigError("grid", "values must be nonnegative")
        object.__setattr__(self, "grid", grid)
        for name in ("network_draws", "mc_trials", "csi_draws"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ConfigError(name, "must be an integer >= 1")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        for name, allowed in (("estimators", ESTIMATORS), ("simulate", SIMULABLE)):
            vals = tuple(getattr(self, name))
            for i, e in enumerate(vals):
                if e not in allowed:
                    raise ConfigError(f"{name}[{i}]", f"unknown estimator {e!r}; choose from {', '.join(allowed)}")
            object.__setattr__(self, name, vals)
        if "ign" in self.estimators and not self.scenario.correlation.is_white:
            raise ConfigError("estimators", "'ign' requires uncorrelated antennas")
        if self.axis == "csi_noise" and not self.simulate:
            raise ConfigError("simulate", "the csi_noise axis needs at least one simulated estimator")
        if not (self.rate >= 0 and np.isfinite(self.rate)):
            raise ConfigError("rate", "must be finite and nonnegative")
        for name in ("hl_ratio", "spatial_ratio"):
            v = getattr(self, name)
            if v is not None and not 0 < v <= 1:
                raise ConfigError(name, "must lie in (0, 1]")
        if not self.eta > 0:
            raise ConfigError("eta", "must be positive")

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        d = dict(d)
        names = {f.name for f in dataclasses.fields(cls)}
        for k in d:
            if k not in names:
                raise ConfigError(k, "unknown key")
        if "scenario" in d:
            d["scenario"] = _scenario_from_dict(d["scenario"])
        for k in ("grid", "estimators", "simulate"):
            if k in d and d[k] is not None:
                if not isinstance(d[k], list):
                    raise ConfigError(k, "must be a list")
                d[k] = tuple(d[k])
        try:
            return cls(**d)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError("<root>", str(e)) from None

    @classmethod
    def from_json(cls, text):
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise ConfigError("<root>", f"invalid JSON: {e}") from None

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        s = {f.name: getattr(self.scenario, f.name) for f in dataclasses.fields(MimoScenario)}
        c = self.scenario.correlation
        s["correlation"] = {"kind": c.kind, "spacing": c.spacing, "coeffs": c.coeffs and list(c.coeffs)}
        d["scenario"] = s
        for k in ("grid", "estimators", "simulate"):
            d[k] = list(d[k])
        return d


def _scenario_from_dict(d):
    if not isinstance(d, dict):
        raise ConfigError("scenario", "must be an object")
    d = dict(d)
    names = {f.name for f in dataclasses.fields(MimoScenario)}
    for k in d:
        if k not in names:
            raise ConfigError(f"scenario.{k}", "unknown key")
    if "correlation" in d:
        c = d["correlation"]
        if not isinstance(c, dict):
            raise ConfigError("scenario.correlation", "must be an object")
        for k in c:
            if k not in ("kind", "spacing", "coeffs"):
                raise ConfigError(f"scenario.correlation.{k}", "unknown key")
        try:
            d["correlation"] = CorrelationModel(
                c.get("kind", "uncorrelated"), c.get("spacing"),
                None if c.get("coeffs") is None else tuple(c["coeffs"]))
        except (TypeError, ValueError) as e:
            raise ConfigError("scenario.correlation", str(e)) from None
    for k in ("n_cells", "n_users", "n_pilots", "n_antennas"):
        if k in d and (not isinstance(d[k], int) or isinstance(d[k], bool)):
            raise ConfigError(f"scenario.{k}", "must be an integer")
    try:
        return MimoScenario(**d)
    except (TypeError, ValueError) as e:
        raise ConfigError("scenario", str(e)) from None
