"""C^1 piecewise-quadratic spline basis on [-1, 1] with affine extension.

The basis is {1, t, t^2, (t - tau_1)^2_+, ..., (t - tau_{S-1})^2_+} over S
equal segments, giving S + 2 degrees of freedom with a continuous first
derivative.  Outside [-1, 1] every basis function continues affinely (first
order Taylor from the nearest endpoint), so the extended functions stay C^1
and linear-in-coefficients.
"""

from __future__ import annotations

import numpy as np

from ..errors import DomainViolation

Array = np.ndarray


class SplineBasis:
    def __init__(self, segments: int):
        if segments < 1:
            raise DomainViolation("segments must be a positive integer")
        self.segments = int(segments)
        self.dof = self.segments + 2
        self.knots = np.linspace(-1.0, 1.0, self.segments + 1)
        self._interior = self.knots[1:-1]

    def _raw(self, t: Array) -> tuple[Array, Array]:
        """Basis values and first derivatives for t inside [-1, 1]."""
        t = np.asarray(t, dtype=float)
        cols = [np.ones_like(t), t, t * t]
        dcols = [np.zeros_like(t), np.ones_like(t), 2.0 * t]
        for tau in self._interior:
            r = np.maximum(t - tau, 0.0)
            cols.append(r * r)
            dcols.append(2.0 * r)
        return np.stack(cols, axis=-1), np.stack(dcols, axis=-1)

    def design(self, t: Array) -> Array:
        """Basis matrix at arbitrary points (affine beyond the endpoints)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tc = np.clip(t, -1.0, 1.0)
        vals, ders = self._raw(tc)
        return vals + ders * (t - tc)[..., None]

    def derivative(self, t: Array) -> Array:
        """Basis derivative matrix (constant beyond the endpoints)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tc = np.clip(t, -1.0, 1.0)
        _, ders = self._raw(tc)
        return ders

    def evaluate(self, coeffs: Array, t: Array) -> Array:
        return self.design(t) @ np.asarray(coeffs, dtype=float)
