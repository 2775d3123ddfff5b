"""Post-processing of trajectories: decay fits, identity and bound checks.

All checks operate on report samples; time integrals use the trapezoidal
rule on the report grid, so their accuracy is set by the report spacing
(keep report_every * dt small, of the order of ten steps, when these
residuals matter).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import DomainSpec, ModalField, grad_norm_sq, l2_norm_sq, poincare_constant, random_band_limited
from .functionals import EnergyReport, ModelParams
from .solver import BLOWUP, COMPLETED, SolverConfig, integrate

# absolute energy floor below which report samples are excluded from fits
# and ratio estimates
ENERGY_FLOOR = 1e-14


class FitError(RuntimeError):
    """Raised when a decay fit has too few usable samples."""


@dataclass(frozen=True)
class DecayFit:
    """Log-linear fit E(t) ~ C1 exp(-C2 t) over a window."""

    C1: float
    C2: float
    window: tuple[float, float]
    r_squared: float
    n_samples: int


@dataclass(frozen=True)
class EstimateSuite:
    """Observable estimates of the decay-chain constants along one run.

    delta_hat: largest delta with I >= delta ||grad u||^2 observed, capped
        at 1 (small fields have I > ||grad u||^2 because the log integrand
        is negative below unit amplitude, while the decay argument only
        needs some delta in (0, 1)).
    c0_hat: max over sampled S of the ratio (integral of E over [S, T]) / E(S).
    cw_hat: max observed ||u||_g^g / ||grad u||^2.
    poincare_margin: max observed ||u_t||_2 / (C_P ||grad u_t||_2); NaN when
        no sample carries the velocity-gradient column.
    m_hat: energy-domination constant assembled from the estimates above.
    """

    delta_hat: float
    c0_hat: float
    cw_hat: float
    poincare_margin: float
    m_hat: float
    n_s_samples: int


def _columns(reports: list[EnergyReport]) -> dict[str, np.ndarray]:
    cols = {}
    for name in ("t", "E", "I", "kinetic", "grad_sq", "lgamma", "cross_term",
                 "identity_residual", "grad_ut_sq"):
        cols[name] = np.array([getattr(r, name) for r in reports], dtype=float)
    return cols


def fit_decay(
    reports: list[EnergyReport],
    window: tuple[float, float] | None = None,
    min_energy: float = ENERGY_FLOOR,
) -> DecayFit:
    """Least-squares line on (t, ln E) inside the window.

    The default window [0.1, 0.75] * t_end skips the initial transient and
    the late near-floor samples.  Samples need E > 1e-14 to count toward
    the ten required for a meaningful fit; ``min_energy`` sets which
    samples actually enter the regression (pass 0.0 to use every positive
    sample, e.g. when the tail is known to be accurate and the window is
    long enough that excluding it would bias the fit).
    """
    c = _columns(reports)
    t, E = c["t"], c["E"]
    if window is None:
        t_end = t[-1] if len(t) else 0.0
        window = (0.1 * t_end, 0.75 * t_end)
    in_window = (t >= window[0]) & (t <= window[1])
    if int(np.sum(in_window & (E > ENERGY_FLOOR))) < 10:
        raise FitError(
            f"need >= 10 samples with E > {ENERGY_FLOOR:g} in window {window}"
        )
    keep = in_window & (E > max(min_energy, 0.0)) & np.isfinite(E)
    tt = t[keep]
    ln_e = np.log(E[keep])
    design = np.vstack([tt, np.ones_like(tt)]).T
    (slope, intercept), *_ = np.linalg.lstsq(design, ln_e, rcond=None)
    pred = design @ (slope, intercept)
    ss_res = float(np.sum((ln_e - pred) ** 2))
    ss_tot = float(np.sum((ln_e - ln_e.mean()) ** 2))
    r_squared = 1.0 if ss_tot < 1e-30 else 1.0 - ss_res / ss_tot
    return DecayFit(
        C1=float(np.exp(intercept)), C2=float(-slope), window=window,
        r_squared=r_squared, n_samples=int(tt.size),
    )


def check_energy_identity(reports: list[EnergyReport]) -> float:
    """Max |E(t) + dissipation ledger - E(0)| normalized by max(E(0), 1e-30)."""
    if not reports:
        raise ValueError("empty trajectory")
    res = max(abs(r.identity_residual) for r in reports)
    return res / max(reports[0].E, 1e-30)


def check_virial_identity(
    reports: list[EnergyReport], n_pairs: int = 10, seed: int = 0
) -> float:
    """Residual of the time-integrated identity obtained by pairing with u.

    Over each sampled interval [S, T],

        int I dt = int ||u_t||^2 dt - [ (u_t, u) + 1/2 ||grad u||^2 ]_S^T,

    both sides evaluated by trapezoid on the report grid.  Returns the
    worst mismatch normalized by max(E(0), 1e-30).
    """
    if len(reports) < 2:
        raise ValueError("need at least two reports")
    c = _columns(reports)
    if not np.isfinite(c["cross_term"]).all():
        raise ValueError("trajectory is missing the cross-term column")
    t, I, kin, grad, cross = c["t"], c["I"], c["kinetic"], c["grad_sq"], c["cross_term"]
    ut_sq = 2.0 * kin
    bracket = cross + 0.5 * grad
    rng = np.random.default_rng(seed)
    n = len(t)
    worst = 0.0
    for _ in range(n_pairs):
        i = int(rng.integers(0, n - 1))
        j = int(rng.integers(i + 1, n))
        lhs = np.trapezoid(I[i:j + 1], t[i:j + 1])
        rhs = np.trapezoid(ut_sq[i:j + 1], t[i:j + 1]) - (bracket[j] - bracket[i])
        worst = max(worst, abs(lhs - rhs))
    return worst / max(reports[0].E, 1e-30)


def check_integral_bound(
    reports: list[EnergyReport],
    domain: DomainSpec,
    params: ModelParams,
    n_s_samples: int = 20,
) -> EstimateSuite:
    """Estimate the decay-chain constants from one completed stable run.

    S values are sampled evenly among reports with E above the energy
    floor in the first half of the run; T is the final report time.
    """
    c = _columns(reports)
    t, E, I, grad, lg = c["t"], c["E"], c["I"], c["grad_sq"], c["lgamma"]
    valid = E >= ENERGY_FLOOR

    pos = valid & (grad > 0)
    delta_hat = min(1.0, float(np.min(I[pos] / grad[pos]))) if pos.any() else float("nan")
    cw_hat = float(np.max(lg[pos] / grad[pos])) if pos.any() else float("nan")

    cp = poincare_constant(domain)
    gut = c["grad_ut_sq"]
    vel = np.isfinite(gut) & (gut > 0)
    if vel.any():
        poincare_margin = float(np.max(np.sqrt(2.0 * c["kinetic"][vel] / gut[vel])) / cp)
    else:
        poincare_margin = float("nan")

    candidates = np.where(valid & (t <= t[-1] / 2.0))[0]
    candidates = candidates[candidates < len(t) - 1]
    if candidates.size:
        take = candidates[np.linspace(0, candidates.size - 1, min(n_s_samples, candidates.size)).astype(int)]
        ratios = [float(np.trapezoid(E[i:], t[i:]) / E[i]) for i in take]
        c0_hat = max(ratios)
        n_used = len(take)
    else:
        c0_hat = float("nan")
        n_used = 0

    g = params.gamma
    if math.isfinite(delta_hat) and delta_hat > 0 and math.isfinite(cw_hat):
        m_hat = 0.5 + (g - 2.0) / (2.0 * g * delta_hat) + 1.0 / g + cw_hat / (g ** 2 * delta_hat)
    else:
        m_hat = float("nan")
    return EstimateSuite(
        delta_hat=delta_hat, c0_hat=c0_hat, cw_hat=cw_hat,
        poincare_margin=poincare_margin, m_hat=m_hat, n_s_samples=n_used,
    )


@dataclass(frozen=True)
class DependenceReport:
    """Growth of the difference D(t) = ||z_t||^2 + ||grad z||^2 under an
    initial perturbation of size epsilon, one row per epsilon."""

    times: tuple[float, ...]
    epsilons: tuple[float, ...]
    D: tuple[tuple[float, ...], ...]           # D_eps(t) per epsilon
    D_over_eps_sq: tuple[tuple[float, ...], ...]
    growth_rate: float                          # slope of ln D fit, largest eps
    growth_r_squared: float
    status: str


def continuous_dependence(
    u0: ModalField,
    u1: ModalField,
    cfg: SolverConfig,
    params: ModelParams,
    epsilons: tuple[float, ...] = (1e-3, 1e-4),
    seed: int = 0,
) -> DependenceReport:
    """Compare the base trajectory against perturbed ones.

    The perturbation direction is one random band-limited field normalized
    to unit gradient norm, scaled by each epsilon and added TO u0.  With
    epsilon = 0 the perturbed run reproduces the base run exactly (the
    integrator is a deterministic function of its inputs).
    """
    base = integrate(u0, u1, cfg, params, store_states=True)
    if base.status != COMPLETED:
        return DependenceReport((), tuple(epsilons), (), (), float("nan"),
                                float("nan"), base.status)
    direction = random_band_limited(u0.domain, np.random.default_rng(seed))
    direction = direction.scaled(1.0 / math.sqrt(grad_norm_sq(direction)))

    times = tuple(s.t for s in base.states)
    d_rows = []
    ratio_rows = []
    for eps in epsilons:
        pert = integrate(u0 + direction.scaled(eps), u1, cfg, params, store_states=True)
        if pert.status != COMPLETED:
            return DependenceReport(times, tuple(epsilons), tuple(d_rows),
                                    tuple(ratio_rows), float("nan"),
                                    float("nan"), pert.status)
        dvals = []
        for sb, sp in zip(base.states, pert.states):
            z = sp.u - sb.u
            zt = sp.ut - sb.ut
            dvals.append(l2_norm_sq(zt) + grad_norm_sq(z))
        d_rows.append(tuple(dvals))
        ratio_rows.append(tuple(d / eps ** 2 if eps else 0.0 for d in dvals))

    rate = float("nan")
    r2 = float("nan")
    if d_rows:
        d0 = np.array(d_rows[0])
        tt = np.array(times)
        mask = (d0 > 0) & (tt > 0)
        if mask.sum() >= 3:
            design = np.vstack([tt[mask], np.ones(int(mask.sum()))]).T
            (slope, icpt), *_ = np.linalg.lstsq(design, np.log(d0[mask]), rcond=None)
            pred = design @ (slope, icpt)
            ss_res = float(np.sum((np.log(d0[mask]) - pred) ** 2))
            ss_tot = float(np.sum((np.log(d0[mask]) - np.log(d0[mask]).mean()) ** 2))
            rate = float(slope)
            r2 = 1.0 if ss_tot < 1e-30 else 1.0 - ss_res / ss_tot
    return DependenceReport(times, tuple(epsilons), tuple(d_rows),
                            tuple(ratio_rows), rate, r2, COMPLETED)


@dataclass(frozen=True)
class ConvergenceStudy:
    """Refinement of the modal band at fixed physical parameters."""

    m_list: tuple[int, ...]
    E_end: tuple[float, ...]
    u_l2_end: tuple[float, ...]
    projection_loss: tuple[float, ...]   # L2 norm of initial data outside each band
    E_diffs: tuple[float, ...]
    passed: bool
    status: str
    failed_level: int | None = None


def _reband(f: ModalField, target: DomainSpec) -> tuple[ModalField, float]:
    """Project a field onto another band of the same box; returns the loss."""
    src = f.domain
    if (src.dim, src.length) != (target.dim, target.length):
        raise ValueError("bands must share the physical box")
    m_src, m_tgt = src.modes_per_dim, target.modes_per_dim
    keep = min(m_src, m_tgt)
    out = np.zeros(target.modal_shape)
    sl = (slice(0, keep),) * src.dim
    out[sl] = f.coeffs[sl]
    dropped = f.coeffs.copy()
    dropped[sl] = 0.0
    loss = math.sqrt(float(np.sum(dropped ** 2)) * src.mode_norm_sq)
    return ModalField(target, out), loss


def convergence_study(
    u0: ModalField,
    u1: ModalField,
    cfg: SolverConfig,
    params: ModelParams,
    m_list: list[int],
) -> ConvergenceStudy:
    """Run the same problem at increasing modal resolution.

    The study passes when the last two successive differences of E(t_end)
    are nonincreasing; a blow-up at any level fails the study outright.
    """
    if len(m_list) < 2 or any(b <= a for a, b in zip(m_list, m_list[1:])):
        raise ValueError("m_list must be strictly increasing with >= 2 levels")
    src = u0.domain
    e_end, u_end, losses = [], [], []
    for level, m in enumerate(m_list):
        dom = DomainSpec(src.dim, src.length, m, src.oversample)
        v0, loss0 = _reband(u0, dom)
        v1, _ = _reband(u1, dom)
        result = integrate(v0, v1, cfg, params)
        if result.status == BLOWUP:
            return ConvergenceStudy(
                m_list=tuple(m_list), E_end=tuple(e_end), u_l2_end=tuple(u_end),
                projection_loss=tuple(losses), E_diffs=(), passed=False,
                status=BLOWUP, failed_level=level,
            )
        e_end.append(result.reports[-1].E)
        u_end.append(math.sqrt(l2_norm_sq(result.final.u)))
        losses.append(loss0)
    diffs = [abs(b - a) for a, b in zip(e_end, e_end[1:])]
    # vacuously true for two-level studies, which carry a single difference
    passed = all(b <= a for a, b in zip(diffs[-2:-1], diffs[-1:]))
    return ConvergenceStudy(
        m_list=tuple(m_list), E_end=tuple(e_end), u_l2_end=tuple(u_end),
        projection_loss=tuple(losses), E_diffs=tuple(diffs), passed=passed,
        status=COMPLETED,
    )
