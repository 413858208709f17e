"""Temporal (or spatial) correlation sequences and their spectra.

A :class:`CorrelationModel` provides the scalar autocorrelation ``c[t]``
(``c[0] = 1``), finite Toeplitz sections ``C_N`` and a quadrature rule for
integrals of the form ``(1/2π)∫ f(S(ω)) dω`` over the power spectral density.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import toeplitz
from scipy.special import j0, roots_legendre

__all__ = ["CorrelationModel", "jakes_correlation"]


@lru_cache(maxsize=16)
def _gauss_legendre(n):
    x, w = roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def jakes_correlation(spacing, lag):
    """Jakes antenna correlation ``J0(2π · spacing · |lag|)``."""
    if spacing <= 0:
        raise ValueError("spacing must be positive (in wavelengths)")
    return j0(2 * np.pi * spacing * np.abs(np.asarray(lag, dtype=float)))


@dataclass(frozen=True)
class CorrelationModel:
    """Correlation sequence of the vector samples.

    Parameters
    ----------
    kind : {"uncorrelated", "jakes", "explicit"}
    spacing : float
        Antenna spacing in wavelengths (``kind="jakes"``).
    coeffs : tuple of float
        ``c[0], c[1], ...`` for ``kind="explicit"``; ``c[0]`` must be 1 and
        the sequence is taken as zero beyond its end.
    """

    kind: str = "uncorrelated"
    spacing: float = None
    coeffs: tuple = field(default=None)

    def __post_init__(self):
        if self.kind == "uncorrelated":
            return
        if self.kind == "jakes":
            if self.spacing is None or not self.spacing > 0:
                raise ValueError("jakes correlation needs a positive spacing")
            return
        if self.kind == "explicit":
            if self.coeffs is None or len(self.coeffs) == 0:
                raise ValueError("explicit correlation needs coefficients")
            c = tuple(float(x) for x in self.coeffs)
            if abs(c[0] - 1.0) > 1e-12:
                raise ValueError("explicit correlation must have c[0] = 1")
            object.__setattr__(self, "coeffs", c)
            return
        raise ValueError(f"unknown correlation kind {self.kind!r}")

    @classmethod
    def uncorrelated(cls):
        return cls("uncorrelated")

    @classmethod
    def jakes(cls, spacing):
        return cls("jakes", spacing=spacing)

    @classmethod
    def explicit(cls, coeffs):
        return cls("explicit", coeffs=tuple(coeffs))

    @property
    def is_white(self):
        return self.kind == "uncorrelated"

    def lag(self, t):
        t = np.abs(np.asarray(t))
        if self.kind == "uncorrelated":
            return (t == 0).astype(float)
        if self.kind == "jakes":
            return jakes_correlation(self.spacing, t)
        c = np.asarray(self.coeffs)
        out = np.zeros(t.shape)
        inside = t < c.size
        out[inside] = c[t[inside].astype(int)]
        return out

    def toeplitz(self, n):
        """Finite ``n × n`` correlation matrix ``C_n``."""
        return toeplitz(self.lag(np.arange(n)))

    def psd(self, omega):
        """Spectral density ``S(ω) = Σ_t c[t] e^{-jωt}`` at ``omega``."""
        w = np.asarray(omega, dtype=float)
        if self.kind == "uncorrelated":
            return np.ones_like(w)
        if self.kind == "explicit":
            c = np.asarray(self.coeffs)
            t = np.arange(1, c.size)
            return c[0] + 2 * np.cos(np.multiply.outer(w, t)) @ c[1:]
        a = self._jakes_band()
        w = np.mod(w + np.pi, 2 * np.pi) - np.pi
        out = np.zeros_like(w)
        inside = np.abs(w) < a
        out[inside] = 2.0 / np.sqrt(a**2 - w[inside] ** 2)
        return out

    def _jakes_band(self):
        a = 2 * np.pi * self.spacing
        if a >= np.pi:
            # aliased Doppler-like spectrum; not needed by the experiments
            raise NotImplementedError("spectral quadrature for jakes needs spacing < 0.5")
        return a

    def spectrum(self, n_points=1024):
        """Quadrature nodes for ``(1/2π)∫ f(S(ω)) dω ≈ Σ_k w_k f(S_k)``.

        Returns
        -------
        values : ndarray
            PSD values ``S_k`` at the nodes.
        weights : ndarray
            Nonnegative weights summing to one.
        """
        if self.kind == "uncorrelated":
            return np.ones(1), np.ones(1)
        if self.kind == "explicit":
            omega = 2 * np.pi * np.arange(n_points) / n_points
            s = self.psd(omega)
            if np.min(s) < -1e-9 * np.max(np.abs(s)):
                raise ValueError("explicit correlation sequence has a negative spectrum")
            return np.maximum(s, 0.0), np.full(n_points, 1.0 / n_points)
        # S(ω) = 2/sqrt(a² - ω²) on |ω| < a; substituting ω = a sin θ removes
        # the edge singularities, leaving (1/2π)∫ f(2/(a cos θ)) a cos θ dθ
        a = self._jakes_band()
        x, wx = _gauss_legendre(int(n_points))
        theta = 0.5 * np.pi * x
        c = np.cos(theta)
        values = 2.0 / (a * c)
        weights = a * c * 0.5 * np.pi * wx / (2 * np.pi)
        gap = 1.0 - a / np.pi
        if gap > 0:
            values = np.append(values, 0.0)
            weights = np.append(weights, gap)
        return values, weights
