"""Seeded 2-D gradient (Perlin) lattice noise, normalized to [-1, 1]."""

from __future__ import annotations

import numpy as np

_SQRT2 = float(np.sqrt(2.0))

# eight unit gradient directions at 45 degree steps
_ANGLES = np.arange(8) * (np.pi / 4.0)
_GRADIENTS = np.stack([np.cos(_ANGLES), np.sin(_ANGLES)], axis=1)


def _fade(t):
    # quintic smoothstep: zero first and second derivative at the lattice
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


class PerlinField:
    """Classic permutation-table gradient noise on the unit integer lattice.

    With unit gradients the raw 2-D noise is bounded by +-sqrt(2)/2, so the
    output is rescaled by sqrt(2) to make the theoretical extremum map to
    exactly +-1 (and clipped as a guard against rounding).
    """

    def __init__(self, seed: int):
        rng = np.random.default_rng(int(seed) & 0x7FFFFFFFFFFFFFFF)
        perm = rng.permutation(256)
        self._perm = np.concatenate([perm, perm]).astype(np.intp)

    def _corner_gradient(self, xi, yi):
        h = self._perm[self._perm[xi & 255] + (yi & 255)] & 7
        return _GRADIENTS[h]

    def sample(self, x, y):
        """Evaluate the field at lattice coordinates; scalars or arrays."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xi = np.floor(x).astype(np.intp)
        yi = np.floor(y).astype(np.intp)
        xf = x - xi
        yf = y - yi
        u = _fade(xf)
        v = _fade(yf)

        corner = {}
        for dx in (0, 1):
            for dy in (0, 1):
                g = self._corner_gradient(xi + dx, yi + dy)
                corner[dx, dy] = g[..., 0] * (xf - dx) + g[..., 1] * (yf - dy)

        nx0 = corner[0, 0] + u * (corner[1, 0] - corner[0, 0])
        nx1 = corner[0, 1] + u * (corner[1, 1] - corner[0, 1])
        raw = nx0 + v * (nx1 - nx0)
        return np.clip(raw * _SQRT2, -1.0, 1.0)
