"""Shared test helpers: random twisted loop-group factors."""

import numpy as np
from scipy.linalg import expm

from psforge.algebra import E12, E13, E23
from psforge.loops import LaurentLoop


def random_twisted_algebra(kmin, kmax, total_norm, rng):
    """Random twisted so(3) Laurent polynomial scaled to a Wiener norm."""
    coeffs = {}
    for k in range(kmin, kmax + 1):
        if k % 2 == 0:
            coeffs[k] = rng.normal(0.0, 1.0) * E12
        else:
            coeffs[k] = rng.normal(0.0, 1.0) * E13 + rng.normal(0.0, 1.0) * E23
    norm = sum(np.abs(c).sum(axis=1).max() for c in coeffs.values())
    return {k: c * (total_norm / norm) for k, c in coeffs.items()}


def group_loop_from_algebra(coeffs, n=64, tail_tol=1e-14):
    """exp of a twisted algebra loop, sampled on the circle and converted
    to real Fourier coefficients. ||exp(X) - I|| <= e^||X|| - 1, so a
    total_norm of 0.25 keeps the factor within 0.3 of the identity."""
    lams = np.exp(2j * np.pi * np.arange(n) / n)
    vals = np.array([expm(sum(c * lam ** k for k, c in coeffs.items()))
                     for lam in lams])
    fc = np.fft.fft(vals, axis=0) / n
    ks = np.fft.fftfreq(n, 1.0 / n).astype(int)
    out = {int(k): fc[i].real for i, k in enumerate(ks)
           if np.abs(fc[i]).max() > tail_tol}
    return LaurentLoop(out, twisted=True, real=True)


def random_twisted_factor(kmin, kmax, rng, total_norm=0.25):
    return group_loop_from_algebra(
        random_twisted_algebra(kmin, kmax, total_norm, rng))


def coeff_dev(a, b):
    """Sup over powers of the entrywise difference of two loops."""
    keys = set(a.coeffs) | set(b.coeffs)
    return max(float(np.abs(a.coeff(k) - b.coeff(k)).max()) for k in keys)
