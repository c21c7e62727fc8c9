# Standard library imports
import math
from dataclasses import dataclass
from functools import cached_property

# Third-party imports
import numpy as np

# Local imports
from src.linalg import PreconditionError


class Region:
    """
    A scanning domain in the complex plane together with its sampling grid.

    Grid points are laid out in one canonical order that every scan, CSV
    and report follows.
    """

    @cached_property
    def points(self) -> np.ndarray:
        pts = self._grid_points()
        pts.setflags(write=False)
        return pts

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = self._grid_boundary()
        mask.setflags(write=False)
        return mask

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    def contains(self, z: complex) -> bool:
        return self.distance_to_boundary(z) >= 0.0

    def is_interior(self, z: complex, margin: float = 0.0) -> bool:
        return self.distance_to_boundary(z) > margin

    def _grid_points(self) -> np.ndarray:
        raise NotImplementedError

    def _grid_boundary(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def spacing(self) -> float:
        raise NotImplementedError

    def distance_to_boundary(self, z: complex) -> float:
        """Positive inside, zero on the boundary, negative outside."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Rectangle(Region):
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    n_re: int
    n_im: int

    def __post_init__(self):
        for value in (self.re_min, self.re_max, self.im_min, self.im_max):
            if not math.isfinite(value):
                raise PreconditionError("Rectangle bounds must be finite")
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise PreconditionError(
                f"Rectangle re=[{self.re_min},{self.re_max}] im=[{self.im_min},{self.im_max}] has empty interior")
        if self.n_re < 2 or self.n_im < 2:
            raise PreconditionError(f"Grid counts must be at least 2, got {self.n_re}x{self.n_im}")

    def _grid_points(self) -> np.ndarray:
        re = np.linspace(self.re_min, self.re_max, self.n_re)
        im = np.linspace(self.im_min, self.im_max, self.n_im)
        # imaginary part outer, real part inner
        return (re[None, :] + 1j * im[:, None]).ravel()

    def _grid_boundary(self) -> np.ndarray:
        mask = np.zeros((self.n_im, self.n_re), dtype=bool)
        mask[0, :] = mask[-1, :] = True
        mask[:, 0] = mask[:, -1] = True
        return mask.ravel()

    @property
    def spacing(self) -> float:
        dx = (self.re_max - self.re_min) / (self.n_re - 1)
        dy = (self.im_max - self.im_min) / (self.n_im - 1)
        return max(dx, dy)

    def distance_to_boundary(self, z: complex) -> float:
        z = complex(z)
        return min(z.real - self.re_min, self.re_max - z.real, z.imag - self.im_min, self.im_max - z.imag)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        re = rng.uniform(self.re_min, self.re_max, count)
        im = rng.uniform(self.im_min, self.im_max, count)
        return re + 1j * im


@dataclass(frozen=True)
class Disk(Region):
    center: complex
    radius: float
    n_radial: int
    n_angular: int

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            raise PreconditionError(f"Disk radius must be positive and finite, got {self.radius}")
        if not (math.isfinite(self.center.real) and math.isfinite(self.center.imag)):
            raise PreconditionError("Disk center must be finite")
        if self.n_radial < 2 or self.n_angular < 2:
            raise PreconditionError(f"Grid counts must be at least 2, got {self.n_radial}x{self.n_angular}")

    def _grid_points(self) -> np.ndarray:
        radii = self.radius * np.arange(1, self.n_radial + 1) / self.n_radial
        angles = 2.0 * np.pi * np.arange(self.n_angular) / self.n_angular
        rings = self.center + (radii[:, None] * np.exp(1j * angles[None, :])).ravel()
        return np.concatenate(([complex(self.center)], rings))

    def _grid_boundary(self) -> np.ndarray:
        mask = np.zeros(1 + self.n_radial * self.n_angular, dtype=bool)
        mask[-self.n_angular:] = True
        return mask

    @property
    def spacing(self) -> float:
        return max(self.radius / self.n_radial, 2.0 * np.pi * self.radius / self.n_angular)

    def distance_to_boundary(self, z: complex) -> float:
        return self.radius - abs(complex(z) - self.center)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        # sqrt of a uniform variate gives a uniform density over the disk
        rho = self.radius * np.sqrt(rng.uniform(0.0, 1.0, count))
        theta = rng.uniform(0.0, 2.0 * np.pi, count)
        return self.center + rho * np.exp(1j * theta)
