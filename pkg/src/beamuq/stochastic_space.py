"""N-dimensional random parameter domain with independent uniform coordinates.

The domain is a product of bounded intervals.  All node families used by the
collocation rules live on the reference cube [-1, 1]^N, so the main job here
is the affine transport between the two, plus the product density and seeded
sampling for the Monte Carlo baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = ["RandomSpace", "make_generator"]


def make_generator(seed: int) -> np.random.Generator:
    """Counter-based generator; identical streams for identical seeds on all platforms."""
    return np.random.Generator(np.random.Philox(key=seed))


@dataclass(frozen=True)
class RandomSpace:
    """Product of uniform distributions over per-coordinate intervals."""

    bounds: tuple[tuple[float, float], ...]
    density_kind: str = "uniform"

    def __post_init__(self):
        if self.density_kind != "uniform":
            raise DomainError(f"unsupported density kind {self.density_kind!r}")
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        for i, (lo, hi) in enumerate(bounds):
            if not lo < hi:
                raise DomainError(f"coordinate {i}: lower bound {lo} must be < upper bound {hi}")
        object.__setattr__(self, "bounds", bounds)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.bounds])

    def contains(self, y) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(y >= self.lower) and np.all(y <= self.upper))

    def map_to_reference(self, y) -> np.ndarray:
        """Affine image of y in [-1, 1]^N; inverse of :meth:`map_from_reference`."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        lo, hi = self.lower, self.upper
        for i in range(self.dim):
            yi = y[..., i]
            if np.any(yi < lo[i]) or np.any(yi > hi[i]):
                raise DomainError(f"coordinate {i}: value outside [{lo[i]}, {hi[i]}]")
        return (2.0 * y - (lo + hi)) / (hi - lo)

    def map_from_reference(self, xi) -> np.ndarray:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if np.any(xi < -1.0) or np.any(xi > 1.0):
            bad = np.where(np.any(np.abs(np.atleast_2d(xi)) > 1.0, axis=0))[0]
            raise DomainError(f"coordinate {int(bad[0])}: reference value outside [-1, 1]")
        lo, hi = self.lower, self.upper
        return 0.5 * (lo + hi) + 0.5 * xi * (hi - lo)

    def density(self, y) -> float:
        """Joint probability density: constant inside the box, zero outside."""
        y = np.asarray(y, dtype=float)
        if not self.contains(y):
            return 0.0
        return float(1.0 / np.prod(self.upper - self.lower))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """One i.i.d. uniform draw; advances the caller-owned generator state."""
        return rng.uniform(self.lower, self.upper)

    def sample_array(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """(count, N) array of i.i.d. draws, same stream as repeated :meth:`sample`."""
        return rng.uniform(self.lower, self.upper, size=(count, self.dim))
