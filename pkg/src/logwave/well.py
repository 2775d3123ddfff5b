"""Fibering map, Nehari projection and potential-well depth estimation.

Along the ray lambda -> lambda*u the functionals reduce to closed forms in
the three moments A = ||grad u||^2, B = integral |u|^g ln|u|, G = ||u||_g^g:

    J(lambda u) = lambda^2 A/2 - lambda^g (B + G ln lambda)/g + lambda^g G/g^2
    I(lambda u) = lambda^2 A - lambda^g (B + G ln lambda)

and lambda * dJ/dlambda = I(lambda u), so critical points of the fibering
map are exactly the Nehari points on the ray.  For A > 0, G > 0 the map
rises from 0, attains its supremum and falls to -infinity; the well depth d
is the infimum of that supremum over directions, estimated here from above
by trial families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .domain import DomainSpec, ModalField, grad_norm_sq, random_band_limited, synthesize
from .functionals import ModelParams, energy, log_moments


class DegenerateFieldError(ValueError):
    """Raised when a projection target is zero or has no fibering maximum."""


class BracketingError(RuntimeError):
    """Raised when the fibering-map scan finds no interior maximum."""


# outcome labels for the stable-set test
IN = "IN"
OUT_I = "OUT_I"
OUT_E = "OUT_E"

SCAN_RANGE = (1e-6, 1e3)
SCAN_POINTS = 400


@dataclass(frozen=True)
class FiberMoments:
    """The three integrals determining J and I along a ray."""

    A: float
    B: float
    G: float


@dataclass(frozen=True)
class WellDepthEstimate:
    """Upper estimate of the well depth from a trial family.

    ``trials`` holds one (label, lambda_star, j_max) triple per trial;
    ``d_hat`` is the minimum of the fibering suprema.  ``safety`` is the
    factor theta applied when testing E(0) < theta * d_hat: d_hat only
    bounds the true depth from above, so membership verdicts derived from
    it are conservative suggestions, not certificates.
    """

    d_hat: float
    trials: tuple[tuple[str, float, float], ...]
    safety: float


@dataclass(frozen=True)
class StableSetVerdict:
    status: str  # IN, OUT_I or OUT_E
    I0: float
    E0: float
    threshold: float  # safety * d_hat
    trivial_zero: bool = False


def fiber_moments(u: ModalField, params: ModelParams) -> FiberMoments:
    A = grad_norm_sq(u)
    values = synthesize(u.domain, u.coeffs)
    G, B = log_moments(values, u.domain.quad_weight, params.gamma)
    return FiberMoments(A=A, B=B, G=G)


def fiber_J(m: FiberMoments, lam, gamma: float):
    """J(lambda u) from precomputed moments; lambda may be an array."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("lambda must be positive")
    lg = lam ** gamma
    out = lam ** 2 * m.A / 2.0 - lg * (m.B + m.G * np.log(lam)) / gamma + lg * m.G / gamma ** 2
    return float(out) if out.ndim == 0 else out


def fiber_I(m: FiberMoments, lam, gamma: float):
    """I(lambda u) from precomputed moments; lambda may be an array."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("lambda must be positive")
    out = lam ** 2 * m.A - lam ** gamma * (m.B + m.G * np.log(lam))
    return float(out) if out.ndim == 0 else out


def _project_moments(m: FiberMoments, gamma: float) -> tuple[float, float]:
    if not (math.isfinite(m.A) and math.isfinite(m.B) and math.isfinite(m.G)):
        raise DegenerateFieldError("non-finite fibering moments")
    if m.A <= 0 or m.G <= 0:
        raise DegenerateFieldError(
            f"degenerate trial (A={m.A:g}, G={m.G:g}); projection needs a nonzero field"
        )

    grid = np.geomspace(SCAN_RANGE[0], SCAN_RANGE[1], SCAN_POINTS)
    j_vals = fiber_J(m, grid, gamma)
    i_best = int(np.argmax(j_vals))

    # bracket the maximum by a sign change of I = lambda dJ/dlambda,
    # widening if the maximum sits on a flat stretch of the scan
    lo = max(i_best - 1, 0)
    hi = min(i_best + 1, SCAN_POINTS - 1)
    while fiber_I(m, grid[lo], gamma) <= 0 and lo > 0:
        lo -= 1
    while fiber_I(m, grid[hi], gamma) >= 0 and hi < SCAN_POINTS - 1:
        hi += 1
    f_lo = fiber_I(m, grid[lo], gamma)
    f_hi = fiber_I(m, grid[hi], gamma)
    if not (f_lo > 0 > f_hi):
        raise BracketingError(
            f"no sign change of the fibering derivative in [{grid[lo]:g}, {grid[hi]:g}]"
        )

    # golden-section sharpening of the bracket, then a root solve on I for
    # a machine-precision critical point (I is well conditioned at the
    # maximum, where J itself is flat)
    a, b = grid[lo], grid[hi]
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = fiber_J(m, c, gamma)
    fd = fiber_J(m, d, gamma)
    while (b - a) > 1e-6 * b:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fiber_J(m, c, gamma)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fiber_J(m, d, gamma)
    lo_f = fiber_I(m, a, gamma)
    hi_f = fiber_I(m, b, gamma)
    if not (lo_f > 0 > hi_f):
        # fall back to the scan bracket if roundoff flattened the refined one
        a, b = grid[lo], grid[hi]
    lambda_star = brentq(lambda x: fiber_I(m, x, gamma), a, b, xtol=1e-30, rtol=8.9e-16)
    j_max = fiber_J(m, lambda_star, gamma)
    return float(lambda_star), float(j_max)


def project_to_nehari(u: ModalField, params: ModelParams) -> tuple[float, float]:
    """Global maximizer lambda* of the fibering map and J(lambda* u).

    fiber_I(lambda*) vanishes to roundoff; J at the maximizer is positive
    for every nonzero field.
    """
    return _project_moments(fiber_moments(u, params), params.gamma)


def default_trial_family(
    domain: DomainSpec, count: int = 32, seed: int = 0
) -> tuple[list[ModalField], list[str]]:
    """First eigenfunction plus ``count`` random band-limited trials."""
    fields = [ModalField.eigenmode(domain, (1,) * domain.dim)]
    labels = ["eigenmode-1"]
    rng = np.random.default_rng(seed)
    for i in range(count):
        fields.append(random_band_limited(domain, rng))
        labels.append(f"random-{i:02d}")
    return fields, labels


def estimate_depth(
    trials: list[ModalField],
    params: ModelParams,
    safety: float = 0.5,
    labels: list[str] | None = None,
) -> WellDepthEstimate:
    """Upper-estimate the well depth as the minimal fibering supremum."""
    if not trials:
        raise ValueError("trial family is empty")
    if not 0 < safety <= 1:
        raise ValueError(f"safety must lie in (0, 1], got {safety}")
    if labels is None:
        labels = [f"trial-{i:02d}" for i in range(len(trials))]
    if len(labels) != len(trials):
        raise ValueError("labels must match trials one to one")
    rows = []
    for label, trial in zip(labels, trials):
        lambda_star, j_max = project_to_nehari(trial, params)
        if not j_max > 0:
            raise DegenerateFieldError(f"trial {label}: nonpositive fibering supremum")
        rows.append((label, lambda_star, j_max))
    d_hat = min(r[2] for r in rows)
    return WellDepthEstimate(d_hat=d_hat, trials=tuple(rows), safety=safety)


def stable_set_check(
    u0: ModalField,
    u1: ModalField,
    d_hat: float,
    safety: float,
    params: ModelParams,
) -> StableSetVerdict:
    """Test I(u0) > 0 and E(0) < safety * d_hat.

    The zero field is excluded from the stable set by convention (it is the
    trivial solution); the verdict flags it explicitly.
    """
    if not d_hat > 0:
        raise ValueError(f"d_hat must be positive, got {d_hat}")
    if not 0 < safety <= 1:
        raise ValueError(f"safety must lie in (0, 1], got {safety}")
    report = energy(u0, u1, params)
    I0 = report.I
    E0 = report.E
    threshold = safety * d_hat
    trivial = not np.any(u0.coeffs)
    if trivial or I0 <= 0:
        status = OUT_I
    elif E0 >= threshold:
        status = OUT_E
    else:
        status = IN
    return StableSetVerdict(status=status, I0=I0, E0=E0, threshold=threshold,
                            trivial_zero=trivial)
