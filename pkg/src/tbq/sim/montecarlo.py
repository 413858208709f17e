"""Seeded Monte-Carlo evaluation of realized quantization systems.

Every chunk of trials draws from its own child of a ``SeedSequence`` whose
spawn key encodes ``(stream, chunk)``, so results do not depend on the number
of worker threads.  Per-trial errors are stored by trial index and reduced in
that order.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np

from ..dither import quantize_with_stats
from ..linalg import sqrtm_psd
from ..mimo.network import mmse_channel_estimate, simulate_channel_outputs

__all__ = ["MCResult", "MMSEEstimator", "monte_carlo_mse", "chunk_seed", "ci_half_width"]

CHUNK = 256


class MCResult(NamedTuple):
    mse: float
    ci_half: float
    overload_rate: float
    errors: np.ndarray


def chunk_seed(seed, *key):
    """Child seed for ``key`` under ``seed`` (an int or a ``SeedSequence``)."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + key)
    return np.random.SeedSequence(int(seed), spawn_key=key)


def ci_half_width(errors):
    """``1.96 · std/√n``; NaN for fewer than two samples."""
    e = np.asarray(errors, dtype=float)
    if e.size < 2:
        return float("nan")
    return float(1.96 * np.std(e, ddof=1) / np.sqrt(e.size))


class MMSEEstimator:
    """Unquantized LMMSE channel estimator built from (possibly noisy) attenuations."""

    quantized = False

    def __init__(self, net, l, scn):
        self.net, self.l, self.scn = net, l, scn

    def estimate(self, Y):
        return mmse_channel_estimate(Y, self.net, self.l, self.scn)


def _run_chunk(design, net, l, scn, count, ss, dither, c_sqrt):
    rng = np.random.default_rng(ss)
    G, Y = simulate_channel_outputs(net, l, scn, rng, trials=count, c_sqrt=c_sqrt)
    if design is None:
        design = MMSEEstimator(net, l, scn)
    if not getattr(design, "quantized", True):
        Gh = design.estimate(Y)
        n_over, n_dims = 0, 0
    else:
        Z = design.combine(Y)
        Q, n_over = quantize_with_stats(Z, design.quantizer(), rng, dither=dither)
        n_dims = 2 * Z.size
        Gh = design.estimate(Q)
    if Gh.shape != G.shape:
        raise ValueError(f"estimate shape {Gh.shape} does not match channel shape {G.shape}")
    err = np.sum(np.abs(G - Gh) ** 2, axis=(-2, -1)) / (G.shape[-2] * G.shape[-1])
    return err, n_over, n_dims


def _check_dims(design, scn):
    N = scn.n_antennas
    n = getattr(design, "n", None)
    if n is not None and n != N:
        raise ValueError(f"design is materialized for {n} antennas, scenario has {N}")
    comb = getattr(design, "combiner", None)
    if n is None and comb is not None and comb.shape[1] != N:
        raise ValueError(f"combiner has {comb.shape[1]} columns, scenario has {N} antennas")


def monte_carlo_mse(design, net, l, scn, trials, seed, dither=True, threads=1, chunk=CHUNK):
    """Empirical average MSE of a realized system.

    Each trial draws ``(G, Y)``, applies the analog combiner, the dithered
    ADCs and the digital matrix, and records ``‖G - Ĝ‖²/(N N_U)``.

    Parameters
    ----------
    design : HLDesign, SpatialDesign, MMSEEstimator or None
        ``None`` simulates the unquantized MMSE estimator of ``net``.
    net : NetworkRealization
        True attenuations used to draw the channels.
    l : int
        Serving cell.
    scn : MimoScenario
        ``scn.n_antennas`` must match the design.
    trials : int
    seed : int or numpy.random.SeedSequence
    dither : bool
    threads : int
        Worker threads; does not change the result.

    Returns
    -------
    MCResult
        ``(mse, ci_half, overload_rate, errors)``; ``ci_half`` is NaN when
        ``trials == 1``.
    """
    trials = int(trials)
    if trials < 1:
        raise ValueError("need at least one trial")
    if design is not None:
        _check_dims(design, scn)
    c_sqrt = None
    if not scn.correlation.is_white:
        c_sqrt = sqrtm_psd(scn.correlation.toeplitz(scn.n_antennas))
    counts = [min(chunk, trials - s) for s in range(0, trials, chunk)]
    jobs = [(design, net, l, scn, c, chunk_seed(seed, i), dither, c_sqrt)
            for i, c in enumerate(counts)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda a: _run_chunk(*a), jobs))
    else:
        parts = [_run_chunk(*a) for a in jobs]
    errors = np.concatenate([p[0] for p in parts])
    n_over = sum(p[1] for p in parts)
    n_dims = sum(p[2] for p in parts)
    rate = n_over / n_dims if n_dims else 0.0
    return MCResult(float(np.mean(errors)), ci_half_width(errors), float(rate), errors)
