"""Box domains with homogeneous Dirichlet conditions and their sine eigenbasis.

The domain is the open box (0, L)^n (n = 1, 2 or 3).  Fields are represented
by coefficients in the eigenbasis of the Dirichlet Laplacian,

    w_k(x) = prod_i sin(k_i pi x_i / L),      k in {1..m}^n,

with eigenvalues lambda_k = sum_i (k_i pi / L)^2 and L2 norm-square
(L/2)^n per eigenfunction.  Because the basis diagonalizes -Delta, gradient
and L2 norms of band-limited fields are exact modal sums (Parseval); only
integrals of non-polynomial quantities require quadrature.

Grid representation uses the interior points x_j = j L / (N+1),
j = 1..N with N = oversample * m per dimension.  On that grid the type-I
discrete sine transform performs exact synthesis/analysis for the modal
band, and the trapezoidal rule (weight h^n, boundary terms vanish) is exact
for products of two in-band fields.  Quadrature of the logarithmic
integrands is approximate; oversampling controls the error.

Mode ordering is lexicographic over multi-indices, i.e. C order of the
coefficient arrays.  All types are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.fft import dstn


@dataclass(frozen=True)
class DomainSpec:
    """Box (0, length)^dim resolved by modes_per_dim sine modes per axis."""

    dim: int
    length: float
    modes_per_dim: int
    oversample: int = 2

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError(f"length must be positive and finite, got {self.length}")
        if self.modes_per_dim < 1:
            raise ValueError(f"modes_per_dim must be >= 1, got {self.modes_per_dim}")
        if self.oversample < 2:
            raise ValueError(f"oversample must be >= 2, got {self.oversample}")

    @property
    def grid_per_dim(self) -> int:
        return self.oversample * self.modes_per_dim

    @property
    def modal_shape(self) -> tuple[int, ...]:
        return (self.modes_per_dim,) * self.dim

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return (self.grid_per_dim,) * self.dim

    @property
    def grid_spacing(self) -> float:
        return self.length / (self.grid_per_dim + 1)

    @property
    def quad_weight(self) -> float:
        """Quadrature weight per grid node (trapezoid, vanishing boundary)."""
        return self.grid_spacing ** self.dim

    @property
    def mode_norm_sq(self) -> float:
        """L2 norm-square of every (unnormalized) basis function."""
        return (self.length / 2.0) ** self.dim

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """lambda_k on the full modal band, shape ``modal_shape``."""
        k = np.arange(1, self.modes_per_dim + 1, dtype=float)
        axis_sq = (k * np.pi / self.length) ** 2
        lam = np.zeros(self.modal_shape)
        for axis in range(self.dim):
            shape = [1] * self.dim
            shape[axis] = self.modes_per_dim
            lam = lam + axis_sq.reshape(shape)
        lam.flags.writeable = False
        return lam

    @property
    def lambda_min(self) -> float:
        return self.dim * (np.pi / self.length) ** 2

    @cached_property
    def axis_coordinates(self) -> np.ndarray:
        x = np.arange(1, self.grid_per_dim + 1, dtype=float) * self.grid_spacing
        x.flags.writeable = False
        return x


def eigenpair(domain: DomainSpec, k: tuple[int, ...]) -> tuple[float, float]:
    """Eigenvalue and L2 norm-square of the basis function with multi-index k."""
    k = tuple(int(ki) for ki in k)
    if len(k) != domain.dim:
        raise IndexError(f"multi-index {k} does not match dim={domain.dim}")
    for ki in k:
        if not 1 <= ki <= domain.modes_per_dim:
            raise IndexError(
                f"mode index {k} out of range 1..{domain.modes_per_dim}"
            )
    lam = sum((ki * np.pi / domain.length) ** 2 for ki in k)
    return lam, domain.mode_norm_sq


def poincare_constant(domain: DomainSpec) -> float:
    """Sharp constant C_P in ||u||_2 <= C_P ||grad u||_2 for this basis."""
    return 1.0 / math.sqrt(domain.lambda_min)


@dataclass(frozen=True)
class ModalField:
    """Scalar field stored as sine-basis coefficients on the modal band.

    Coefficients may be non-finite (a diverging simulation is still
    representable); operations that need finite data check explicitly.
    """

    domain: DomainSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=float)
        if arr.shape != self.domain.modal_shape:
            raise ValueError(
                f"coefficient shape {arr.shape} does not match modal band "
                f"{self.domain.modal_shape}"
            )
        if arr is self.coeffs and arr.flags.writeable:
            arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def zeros(cls, domain: DomainSpec) -> "ModalField":
        return cls(domain, np.zeros(domain.modal_shape))

    @classmethod
    def eigenmode(cls, domain: DomainSpec, k: tuple[int, ...], amplitude: float = 1.0) -> "ModalField":
        eigenpair(domain, k)  # validates the index
        c = np.zeros(domain.modal_shape)
        c[tuple(ki - 1 for ki in k)] = amplitude
        return cls(domain, c)

    @property
    def is_finite(self) -> bool:
        return bool(np.isfinite(self.coeffs).all())

    def scaled(self, factor: float) -> "ModalField":
        return ModalField(self.domain, factor * self.coeffs)

    def __add__(self, other: "ModalField") -> "ModalField":
        if other.domain != self.domain:
            raise ValueError("fields live on different domains")
        return ModalField(self.domain, self.coeffs + other.coeffs)

    def __sub__(self, other: "ModalField") -> "ModalField":
        if other.domain != self.domain:
            raise ValueError("fields live on different domains")
        return ModalField(self.domain, self.coeffs - other.coeffs)

    def __mul__(self, factor: float) -> "ModalField":
        return self.scaled(factor)

    __rmul__ = __mul__


@dataclass(frozen=True)
class GridField:
    """Field values on the interior tensor quadrature grid."""

    domain: DomainSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != self.domain.grid_shape:
            raise ValueError(
                f"grid shape {arr.shape} does not match quadrature grid "
                f"{self.domain.grid_shape}"
            )
        if arr is self.values and arr.flags.writeable:
            arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


def _band_slices(domain: DomainSpec) -> tuple[slice, ...]:
    return (slice(0, domain.modes_per_dim),) * domain.dim


def synthesize(domain: DomainSpec, coeffs: np.ndarray) -> np.ndarray:
    """Evaluate modal coefficients on the quadrature grid (raw arrays)."""
    padded = np.zeros(domain.grid_shape)
    padded[_band_slices(domain)] = coeffs
    # DST-I per axis carries a factor 2 relative to plain sine synthesis
    return (0.5 ** domain.dim) * dstn(padded, type=1)


def analyze(domain: DomainSpec, values: np.ndarray) -> np.ndarray:
    """L2-project grid values onto the modal band (raw arrays)."""
    full = dstn(values, type=1) / float(domain.grid_per_dim + 1) ** domain.dim
    return full[_band_slices(domain)].copy()


def to_grid(f: ModalField) -> GridField:
    return GridField(f.domain, synthesize(f.domain, f.coeffs))


def to_modal(g: GridField) -> ModalField:
    return ModalField(g.domain, analyze(g.domain, g.values))


def grad_norm_sq(f: ModalField) -> float:
    """||grad u||_2^2 as the exact modal sum."""
    return float(np.sum(f.domain.eigenvalues * f.coeffs ** 2) * f.domain.mode_norm_sq)


def l2_norm_sq(f: ModalField) -> float:
    """||u||_2^2 as the exact modal sum (Parseval)."""
    return float(np.sum(f.coeffs ** 2) * f.domain.mode_norm_sq)


def l2_inner(f: ModalField, g: ModalField) -> float:
    """Inner product (f, g), exact on the modal band."""
    if f.domain != g.domain:
        raise ValueError("fields live on different domains")
    return float(np.sum(f.coeffs * g.coeffs) * f.domain.mode_norm_sq)


def lp_norm(f: ModalField, p: float) -> float:
    """L^p norm by quadrature on the oversampled grid."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(synthesize(f.domain, f.coeffs))
    return float((f.domain.quad_weight * np.sum(a ** p)) ** (1.0 / p))


def random_band_limited(domain: DomainSpec, rng: np.random.Generator) -> ModalField:
    """Field with independent standard normal coefficients on the band."""
    return ModalField(domain, rng.standard_normal(domain.modal_shape))
