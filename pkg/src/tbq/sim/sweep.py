"""Parameter sweeps over networks: analytic MSE formulas and Monte-Carlo runs.

Networks are drawn once per sweep from ``SeedSequence(seed, (0, j))`` and
reused for every axis value.  Monte-Carlo streams are keyed by
``(1, network, estimator, csi draw)`` and the CSI perturbations by
``(2, network, csi draw)``.
"""
import csv
import dataclasses
import io
import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from ..hardware import QuantBudget
from ..mimo.estimators import (
    digital_only_design,
    digital_only_mse,
    mimo_hl,
    mimo_mse_ign,
    mimo_mse_mmse,
    mimo_mse_opt,
    spatial_design,
    spatial_mse_finite,
    spatial_mse_iid,
)
from ..mimo.network import NetworkRealization, generate_network
from .config import ESTIMATORS
from .montecarlo import MMSEEstimator, chunk_seed, ci_half_width, monte_carlo_mse

__all__ = ["SweepRow", "SweepResult", "run_sweep", "point_settings", "HEADER"]

HEADER = ("axis", "estimator", "analytic_mse", "empirical_mse", "ci_half", "overload_rate", "wall_ms")


@dataclass(frozen=True)
class SweepRow:
    axis: float
    estimator: str
    analytic_mse: float = None
    empirical_mse: float = None
    ci_half: float = None
    overload_rate: float = None
    wall_ms: float = None


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.9g}"


@dataclass
class SweepResult:
    axis_name: str
    rows: list

    def column(self, estimator, name="analytic_mse"):
        """``(axis values, column)`` for one estimator as float arrays."""
        sel = [r for r in self.rows if r.estimator == estimator]
        x = np.array([r.axis for r in sel], dtype=float)
        y = np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in sel])
        return x, y

    def to_csv(self, fh=None, timing=False):
        """Write the table; returns the text when ``fh`` is None.

        ``wall_ms`` is left empty unless ``timing`` is set so that output
        stays byte-identical across runs.
        """
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADER)
        for r in self.rows:
            w.writerow([_fmt(r.axis), r.estimator, _fmt(r.analytic_mse), _fmt(r.empirical_mse),
                        _fmt(r.ci_half), _fmt(r.overload_rate),
                        _fmt(r.wall_ms) if timing else ""])
        if fh is None:
            return buf.getvalue()
        return None

    def gnuplot_script(self, csv_path):
        labels = {"r": "analog combining ratio r", "rate": "rate R [bits/entry]",
                  "pilots": "pilot length", "csi_noise": "attenuation noise variance"}
        ests = list(dict.fromkeys(r.estimator for r in self.rows))
        col = 4 if all(r.analytic_mse is None for r in self.rows) else 3
        lines = [
            "set datafile separator ','",
            "set logscale y",
            f"set xlabel '{labels[self.axis_name]}'",
            "set ylabel 'average MSE'",
            "set key outside right",
            "plot " + ", \\\n     ".join(
                f"'< grep \",{e},\" {csv_path}' using 1:{col} with linespoints title '{e}'"
                for e in ests),
        ]
        return "\n".join(lines) + "\n"


def point_settings(cfg, value):
    """Scenario, rate and ratios ``(scn, R, r_hl, r_s)`` at one axis value."""
    scn = cfg.scenario
    if cfg.axis == "pilots":
        scn = dataclasses.replace(scn, n_pilots=int(value))
    R = float(value) if cfg.axis == "rate" else cfg.rate
    if cfg.axis == "r":
        return scn, R, float(value), float(value)
    r_hl = cfg.hl_ratio if cfg.hl_ratio is not None else min(scn.n_users / scn.n_pilots, R / 2)
    r_s = cfg.spatial_ratio if cfg.spatial_ratio is not None else min(1.0, R / 2)
    return scn, R, r_hl, r_s


def _budget(R, r, eta):
    try:
        return QuantBudget(R, r, eta)
    except ValueError:
        return None


def _analytic(est, net, scn, R, r_hl, r_s, eta):
    nan = float("nan")
    if est == "mmse":
        return mimo_mse_mmse(net, 0, scn)
    if est == "opt":
        return mimo_mse_opt(net, 0, scn, R)
    if est == "ign":
        return mimo_mse_ign(net, 0, scn, R)
    if est == "hl":
        b = _budget(R, r_hl, eta)
        return nan if b is None else mimo_hl(net, 0, scn, b, materialize=False)[1]
    if est == "shl":
        b = _budget(R, r_s, eta)
        if b is None:
            return nan
        if scn.correlation.is_white:
            return spatial_mse_iid(net, 0, scn, b)
        return spatial_mse_finite(net, 0, scn, b)
    if est == "digital":
        return digital_only_mse(net, 0, scn, R) if R >= 2 else nan
    raise ValueError(f"unknown estimator {est!r}")


def _design(est, net, scn, R, r_hl, r_s, eta):
    if est == "mmse":
        return MMSEEstimator(net, 0, scn)
    if est == "hl":
        b = _budget(R, r_hl, eta)
        return None if b is None else mimo_hl(net, 0, scn, b)[0]
    if est == "shl":
        b = _budget(R, r_s, eta)
        return None if b is None else spatial_design(net, 0, scn, b)
    if est == "digital":
        return digital_only_design(net, 0, scn, R, eta) if R >= 2 else None
    raise ValueError(f"estimator {est!r} cannot be simulated")


def _perturb(net, sigma2, ss):
    rng = np.random.default_rng(ss)
    w = rng.standard_normal(net.d.shape)
    return NetworkRealization(np.abs(net.d + np.sqrt(sigma2) * w), seed=net.seed)


def run_sweep(cfg, threads=1, progress=None):
    """Evaluate every estimator of ``cfg`` along its axis.

    Returns
    -------
    SweepResult
        One row per (axis value, estimator) in grid order.
    """
    nets = [generate_network(cfg.scenario, chunk_seed(cfg.seed, 0, j))
            for j in range(cfg.network_draws)]
    ests = cfg.estimators
    if cfg.axis == "csi_noise":
        # no closed forms with mismatched statistics: simulation only
        ests = tuple(e for e in ests if e in cfg.simulate) or cfg.simulate
    rows = []
    for value in cfg.grid:
        scn, R, r_hl, r_s = point_settings(cfg, value)
        for est in ests:
            t0 = time.perf_counter()
            analytic = None
            if cfg.axis != "csi_noise":
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    analytic = float(np.mean([_analytic(est, n, scn, R, r_hl, r_s, cfg.eta)
                                              for n in nets]))
            emp = ci = over = None
            if est in cfg.simulate:
                emp, ci, over = _simulate(cfg, est, nets, scn, R, r_hl, r_s, value, threads)
            ms = 1e3 * (time.perf_counter() - t0)
            rows.append(SweepRow(float(value), est, analytic, emp, ci, over, ms))
            if progress is not None:
                progress(rows[-1])
    return SweepResult(cfg.axis, rows)


def _simulate(cfg, est, nets, scn, R, r_hl, r_s, value, threads):
    tag = ESTIMATORS.index(est)
    errs, overs = [], []
    draws = cfg.csi_draws if cfg.axis == "csi_noise" else 1
    for j, net in enumerate(nets):
        for k in range(draws):
            known = net
            if cfg.axis == "csi_noise" and value > 0:
                known = _perturb(net, float(value), chunk_seed(cfg.seed, 2, j, k))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                design = _design(est, known, scn, R, r_hl, r_s, cfg.eta)
            if design is None:
                return float("nan"), float("nan"), float("nan")
            res = monte_carlo_mse(design, net, 0, scn, cfg.mc_trials,
                                  chunk_seed(cfg.seed, 1, j, tag, k),
                                  dither=cfg.dither, threads=threads)
            errs.append(res.errors)
            overs.append(res.overload_rate)
    e = np.concatenate(errs)
    return float(np.mean(e)), ci_half_width(e), float(np.mean(overs))
