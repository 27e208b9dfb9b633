"""Uniform B-spline bases on a bounded interval.

A grid with ``intervals`` sub-intervals of ``[lo, hi]`` and spline degree
``k`` carries ``intervals + k`` basis functions over a knot vector that is
extended ``k`` steps beyond each boundary (uniform spacing everywhere).
Inputs outside ``[lo, hi]`` are clamped to the boundary before evaluation,
so every edge built on top of these bases is constant outside its grid.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputDomainError


@dataclass(frozen=True)
class SplineGrid:
    """Uniform knot layout for one spline edge."""

    lo: float
    hi: float
    intervals: int
    degree: int = 3

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ConfigError("grid bounds must be finite")
        if not self.lo < self.hi:
            raise ConfigError(
                "grid requires lo < hi, got [%r, %r]" % (self.lo, self.hi)
            )
        if int(self.intervals) < 1:
            raise ConfigError("grid needs at least one interval")
        if int(self.degree) < 1:
            raise ConfigError("spline degree must be >= 1")

    @property
    def n_basis(self):
        return self.intervals + self.degree

    @property
    def step(self):
        return (self.hi - self.lo) / self.intervals

    def knots(self):
        """Full extended knot vector, ``intervals + 2*degree + 1`` entries."""
        idx = np.arange(-self.degree, self.intervals + self.degree + 1)
        return self.lo + idx * self.step

    def greville(self):
        """Knot averages; coefficients equal to these reproduce ``z`` exactly."""
        t = self.knots()
        k = self.degree
        return np.array([t[i + 1 : i + k + 1].mean() for i in range(self.n_basis)])


def _raw_basis(zc, knots, degree, step):
    """Cox-de Boor recursion on already-clamped inputs.

    ``zc`` has shape ``(...,)``, ``knots`` broadcasts against ``zc[..., None]``.
    Returns a pair ``(basis_k, basis_km1)`` where ``basis_k`` has the final
    degree and ``basis_km1`` is the degree ``k-1`` table used for derivatives.
    """
    z = zc[..., None]
    hi = knots[..., -degree - 1] if knots.ndim > 1 else knots[-degree - 1]
    b = ((z >= knots[..., :-1]) & (z < knots[..., 1:])).astype(float)
    # half-open spans put z == hi into the first extension span beyond the
    # grid; move it back into the last interior span instead
    at_hi = zc == hi
    if np.any(at_hi):
        last = b.shape[-1] - degree  # first extension span, [t_{G+k}, ...)
        b[..., last - 1] = np.where(at_hi, 1.0, b[..., last - 1])
        b[..., last] = np.where(at_hi, 0.0, b[..., last])
    below = None
    for d in range(1, degree + 1):
        denom_l = knots[..., d:-1] - knots[..., : -d - 1]
        denom_r = knots[..., d + 1 :] - knots[..., 1:-d]
        left = (z - knots[..., : -d - 1]) / denom_l
        right = (knots[..., d + 1 :] - z) / denom_r
        if d == degree:
            below = b
        b = left * b[..., :-1] + right * b[..., 1:]
    return b, below


def bspline_basis(z, grid, derivative=False):
    """Evaluate all basis functions of ``grid`` at ``z``.

    Parameters
    ----------
    z : scalar or array
        Evaluation points; values outside ``[lo, hi]`` are clamped.
    grid : SplineGrid
    derivative : bool
        When true, also return the derivative of each basis function
        (the derivative is taken on the clamped coordinate, i.e. it is
        zero outside the open grid interval).

    Returns
    -------
    ``(..., n_basis)`` array, or a tuple of two such arrays when
    ``derivative`` is set.  Rows sum to one on ``[lo, hi]``.
    """
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise InputDomainError("spline evaluation requires finite inputs")
    zc = np.clip(z, grid.lo, grid.hi)
    basis, below = _raw_basis(zc, grid.knots(), grid.degree, grid.step)
    if not derivative:
        return basis
    dbasis = (below[..., :-1] - below[..., 1:]) / grid.step
    outside = (z < grid.lo) | (z > grid.hi)
    if np.any(outside):
        dbasis = np.where(outside[..., None], 0.0, dbasis)
    return basis, dbasis


def silu(z):
    """Fixed smooth baseline ``b(z) = z * sigmoid(z)`` used by every edge."""
    return z / (1.0 + np.exp(-z))


def silu_prime(z):
    s = 1.0 / (1.0 + np.exp(-z))
    return s * (1.0 + z * (1.0 - s))
