"""Per-layer filter spectra: flatten, center, eigendecompose, threshold.

Each conv layer's filters are flattened to the rows of an N x D matrix.
After centering, the eigenvalues of the N x N Gram matrix G = M.M^T give
the spectral energy; the reserved count d for a threshold beta is the
smallest d whose cumulative energy ratio reaches beta, and the filters
beyond d account for exactly the tail eigenvalue sum of reconstruction
error.
"""

from dataclasses import dataclass

import numpy as np

from snfprune._kernels import jacobi_sweeps

JACOBI_TOL_SCALE = 1e-12
JACOBI_MAX_SWEEPS = 30
NEGATIVE_EIG_FLOOR = 1e-8
ZERO_ENERGY_SCALE = 1e-12
FULL_RATIO_TOL = 1e-9


@dataclass(frozen=True)
class FilterMatrix:
    layer: str
    rows: int
    cols: int
    values: np.ndarray
    mean: np.ndarray = None
    centered: bool = False


@dataclass(frozen=True)
class LayerSpectrum:
    eigenvalues: np.ndarray
    total: float
    cumulative_ratio: np.ndarray


def build_filter_matrix(layer, weight):
    """Flatten a conv weight [N,C,kh,kw] (or linear weight [N,D]) to N rows."""
    arr = np.asarray(weight, dtype=np.float64)
    if arr.ndim == 4:
        values = arr.reshape(arr.shape[0], -1).copy()
    elif arr.ndim == 2:
        values = arr.copy()
    else:
        raise ValueError("layer %r: weight must have 2 or 4 dimensions, got %d"
                         % (layer, arr.ndim))
    return FilterMatrix(layer=layer, rows=values.shape[0], cols=values.shape[1],
                        values=values)


def center(m):
    """Subtract the column-wise mean row; returns a new centered matrix."""
    if m.centered:
        raise ValueError("layer %r: matrix is already centered" % m.layer)
    mean = m.values.mean(axis=0)
    return FilterMatrix(layer=m.layer, rows=m.rows, cols=m.cols,
                        values=m.values - mean, mean=mean, centered=True)


def symmetric_eigen(g, max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigenvalues (descending) and orthonormal eigenvector columns of ``g``.

    Cyclic Jacobi rotations; converged when the off-diagonal Frobenius norm
    falls to 1e-12 times the Frobenius norm of ``g``. Raises RuntimeError if
    the sweep budget is exhausted first.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("matrix must be square, got shape %s" % (g.shape,))
    norm = float(np.linalg.norm(g))
    if float(np.linalg.norm(g - g.T)) > 1e-9 * norm:
        raise ValueError("matrix is not symmetric")

    a = np.ascontiguousarray((g + g.T) / 2.0)
    n = a.shape[0]
    v = np.eye(n, dtype=np.float64)
    sweeps = jacobi_sweeps(a, v, JACOBI_TOL_SCALE * norm, max_sweeps)
    if sweeps < 0:
        raise RuntimeError("eigensolver did not converge within %d sweeps" % max_sweeps)
    eigenvalues = np.diag(a).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], v[:, order]


def gram_spectrum(m, max_sweeps=JACOBI_MAX_SWEEPS):
    """Spectrum of the Gram matrix of a centered filter matrix."""
    if not m.centered:
        raise ValueError("layer %r: spectrum requires a centered matrix" % m.layer)
    gram = m.values @ m.values.T
    eigenvalues, _ = symmetric_eigen(gram, max_sweeps=max_sweeps)
    trace = float(np.trace(gram))
    floor = -NEGATIVE_EIG_FLOOR * max(trace, 0.0)
    if np.any(eigenvalues < floor):
        raise RuntimeError("layer %r: eigenvalue %g below the numerical floor %g"
                           % (m.layer, eigenvalues.min(), floor))
    eigenvalues = np.maximum(eigenvalues, 0.0)
    cumulative = np.cumsum(eigenvalues)
    total = float(cumulative[-1])
    if total > 0.0:
        ratio = cumulative / total
    else:
        ratio = np.zeros_like(cumulative)
    return LayerSpectrum(eigenvalues=eigenvalues, total=total, cumulative_ratio=ratio)


def reserved_count(s, beta):
    """Smallest d >= 1 whose cumulative energy ratio reaches ``beta``.

    Zero-energy spectra reserve a single filter. At beta = 1 the first ratio
    within 1e-9 of 1 counts as full coverage, capped at N.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must be in [0, 1], got %r" % beta)
    n = len(s.eigenvalues)
    if s.total <= ZERO_ENERGY_SCALE * n:
        return 1
    effective = min(float(beta), 1.0 - FULL_RATIO_TOL)
    idx = int(np.searchsorted(s.cumulative_ratio, effective, side="left"))
    return min(idx + 1, n)


def tail_error(s, d):
    """Reconstruction error implied by keeping d filters: the eigenvalue tail sum."""
    n = len(s.eigenvalues)
    if not 1 <= d <= n:
        raise ValueError("d must be in [1, %d], got %r" % (n, d))
    return float(np.sum(s.eigenvalues[d:]))


def reconstruction_error(m, d):
    """Tail eigenvalue sum for a centered matrix when d filters are kept."""
    if not m.centered:
        raise ValueError("layer %r: reconstruction error requires a centered matrix"
                         % m.layer)
    return tail_error(gram_spectrum(m), d)


def layer_spectra(net, archive):
    """Centered-filter spectrum for every prunable layer of ``net``."""
    spectra = {}
    for spec in net.layers:
        if spec.prunable:
            m = build_filter_matrix(spec.name, archive[spec.bindings["weight"]])
            spectra[spec.name] = gram_spectrum(center(m))
    return spectra
