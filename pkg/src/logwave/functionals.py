"""The logarithmic source term and the associated energy functionals.

For the equation  u_tt - Delta u - Delta u_t = |u|^(g-2) u ln|u|  the
relevant scalars of a state (u, u_t) are

    E = 1/2 ||u_t||_2^2 + J(u)                         (total energy)
    J = 1/2 ||grad u||_2^2 - (1/g) B(u) + (1/g^2) ||u||_g^g
    I = ||grad u||_2^2 - B(u)                          (Nehari functional)

with B(u) = integral of |u|^g ln|u|.  Quadratic terms are exact modal sums;
B and ||u||_g^g are evaluated by quadrature from a single shared grid
synthesis so that E, J and I of one report are mutually consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import ModalField, grad_norm_sq, l2_inner, l2_norm_sq, synthesize

# below this magnitude the integrand |u|^g ln|u| is taken as exactly zero,
# avoiding log-underflow noise
ZERO_CLIP = 1e-300


def gamma_window(dim: int) -> tuple[float, float] | None:
    """Admissible exponent window [2(n-1)/(n-2), 2n/(n-2)) or None if n < 3."""
    if dim < 3:
        return None
    return 2.0 * (dim - 1) / (dim - 2), 2.0 * dim / (dim - 2)


@dataclass(frozen=True)
class ModelParams:
    """Exponent and dimension of the logarithmic source.

    With ``unsafe_gamma`` unset the exponent must lie in the subcritical
    window for the given dimension (which requires dim >= 3); the flag
    relaxes the window to gamma > 2 for low-dimensional debug runs.
    ``source_enabled=False`` switches the source off entirely, turning the
    model into the linear strongly damped wave equation (the log terms of
    the energy vanish with it).
    """

    gamma: float
    dim: int
    unsafe_gamma: bool = False
    source_enabled: bool = True

    def __post_init__(self):
        if not (self.gamma > 2 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be finite and > 2, got {self.gamma}")
        if not self.unsafe_gamma:
            window = gamma_window(self.dim)
            if window is None:
                raise ValueError(
                    f"dim={self.dim} < 3 requires unsafe_gamma=True"
                )
            lo, hi = window
            if not (lo <= self.gamma < hi):
                raise ValueError(
                    f"gamma={self.gamma} outside [{lo:g}, {hi:g}) for "
                    f"dim={self.dim} (set unsafe_gamma to override)"
                )

    @property
    def rho(self) -> float | None:
        """Midpoint of the admissible gap above gamma (diagnostic only)."""
        window = gamma_window(self.dim)
        if window is None or self.gamma >= window[1]:
            return None
        return 0.5 * (window[1] - self.gamma)

    @property
    def mu(self) -> float | None:
        rho = self.rho
        if rho is None:
            return None
        return rho * (self.gamma - 1.0) / self.gamma


@dataclass(frozen=True)
class EnergyReport:
    """One time sample of the energy ledger.

    The first eleven fields are the CSV columns, in order.  kinetic is
    1/2 ||u_t||_2^2, grad_sq is ||grad u||_2^2, lgamma is ||u||_g^g,
    logterm is B(u), cross_term is (u_t, u).  damping_integral and
    identity_residual are filled by the integrator; grad_ut_sq
    (||grad u_t||_2^2) is carried in memory for the pointwise Poincare
    check but is not a CSV column.
    """

    t: float
    E: float
    J: float
    I: float
    kinetic: float
    grad_sq: float
    lgamma: float
    logterm: float
    cross_term: float
    damping_integral: float = 0.0
    identity_residual: float = 0.0
    grad_ut_sq: float = float("nan")


CSV_COLUMNS = (
    "t", "E", "J", "I", "kinetic", "grad_sq", "lgamma", "logterm",
    "cross_term", "damping_integral", "identity_residual",
)


def _abs_pow(a: np.ndarray, p: float) -> np.ndarray:
    # integer powers dominate the hot path; np.power with a float exponent
    # costs a transcendental per element
    if p == 1.0:
        return a.copy()
    if p == 2.0:
        return a * a
    if p == 3.0:
        return a * a * a
    if p == 4.0:
        sq = a * a
        return sq * sq
    return np.power(a, p)


def source_eval(s, gamma: float):
    """The scalar nonlinearity |s|^(gamma-2) s ln|s|, extended by 0 at s=0.

    Accepts scalars or arrays; odd in s.  The continuous extension at zero
    is exact for gamma > 2.
    """
    if gamma <= 2:
        raise ValueError(f"gamma must be > 2, got {gamma}")
    arr = np.asarray(s, dtype=float)
    a = np.abs(arr)
    log_a = np.log(np.maximum(a, ZERO_CLIP))
    out = _abs_pow(a, gamma - 2.0) * arr * log_a
    # |s| < ZERO_CLIP underflows to zero in the power factor except for
    # gamma barely above 2; clamp explicitly
    out = np.where(a < ZERO_CLIP, 0.0, out)
    if np.isscalar(s) or arr.ndim == 0:
        return float(out)
    return out


def log_moments(values: np.ndarray, quad_weight: float, gamma: float) -> tuple[float, float]:
    """Quadrature of (||u||_g^g, B(u)) from grid values of u."""
    a = np.abs(values)
    log_a = np.log(np.maximum(a, ZERO_CLIP))
    pg = _abs_pow(a, gamma)
    lgamma = quad_weight * float(np.sum(pg))
    logterm = quad_weight * float(np.sum(np.where(a < ZERO_CLIP, 0.0, pg * log_a)))
    return lgamma, logterm


def _require_finite(f: ModalField, name: str):
    if not f.is_finite:
        raise ValueError(f"{name} contains non-finite coefficients")


def energy(u: ModalField, ut: ModalField, params: ModelParams) -> EnergyReport:
    """Evaluate the full energy report of a state (ledger fields left zero)."""
    if u.domain != ut.domain:
        raise ValueError("u and u_t live on different domains")
    _require_finite(u, "u")
    _require_finite(ut, "u_t")
    kinetic = 0.5 * l2_norm_sq(ut)
    grad_sq = grad_norm_sq(u)
    cross = l2_inner(u, ut)
    g = params.gamma
    if params.source_enabled:
        values = synthesize(u.domain, u.coeffs)
        lgamma, logterm = log_moments(values, u.domain.quad_weight, g)
    else:
        lgamma = logterm = 0.0
    J = 0.5 * grad_sq - logterm / g + lgamma / g ** 2
    I = grad_sq - logterm
    return EnergyReport(
        t=0.0, E=kinetic + J, J=J, I=I, kinetic=kinetic, grad_sq=grad_sq,
        lgamma=lgamma, logterm=logterm, cross_term=cross,
        grad_ut_sq=grad_norm_sq(ut),
    )


def nehari_I(u: ModalField, params: ModelParams) -> float:
    """I(u) = ||grad u||_2^2 - B(u)."""
    _require_finite(u, "u")
    grad_sq = grad_norm_sq(u)
    if not params.source_enabled:
        return grad_sq
    values = synthesize(u.domain, u.coeffs)
    _, logterm = log_moments(values, u.domain.quad_weight, params.gamma)
    return grad_sq - logterm


def uniform_bound_constant(gamma: float) -> float:
    """min{1/2, (gamma-2)/(2 gamma), 1/gamma^2}, the coercivity constant."""
    return min(0.5, (gamma - 2.0) / (2.0 * gamma), 1.0 / gamma ** 2)


def log_bound_small(s, gamma: float):
    """s^(gamma-1) |ln s| on (0,1) against its sharp bound 1/(e(gamma-1)).

    Returns (lhs, bound); the maximum is attained at s = e^(-1/(gamma-1)).
    """
    if gamma <= 2:
        raise ValueError(f"gamma must be > 2, got {gamma}")
    arr = np.asarray(s, dtype=float)
    if np.any(arr <= 0) or np.any(arr >= 1):
        raise ValueError("s must lie strictly inside (0, 1)")
    lhs = arr ** (gamma - 1.0) * np.abs(np.log(arr))
    bound = 1.0 / (math.e * (gamma - 1.0))
    if np.isscalar(s) or arr.ndim == 0:
        return float(lhs), bound
    return lhs, bound


def log_bound_large(s, mu: float):
    """s^(-mu) ln s on [1, inf) against its sharp bound 1/(e mu).

    Returns (lhs, bound); lhs vanishes at s = 1 and the supremum is
    attained at s = e^(1/mu).
    """
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 1):
        raise ValueError("s must be >= 1")
    lhs = arr ** (-mu) * np.log(arr)
    bound = 1.0 / (math.e * mu)
    if np.isscalar(s) or arr.ndim == 0:
        return float(lhs), bound
    return lhs, bound


def source_dual_norm(u: ModalField, params: ModelParams) -> float:
    """||f(u)||_{g/(g-1)} with f the log source, by grid quadrature."""
    _require_finite(u, "u")
    g = params.gamma
    q = g / (g - 1.0)
    a = np.abs(synthesize(u.domain, u.coeffs))
    log_a = np.log(np.maximum(a, ZERO_CLIP))
    integrand = np.where(
        a < ZERO_CLIP, 0.0, np.abs(_abs_pow(a, g - 1.0) * log_a) ** q
    )
    total = u.domain.quad_weight * float(np.sum(integrand))
    if not math.isfinite(total):
        raise ValueError("non-finite integrand in dual-norm quadrature")
    return total ** (1.0 / q)
