"""Trajectory diagnostics: the a priori estimate ledger made executable.

Every monitored quantity is a norm the fields module can compute; the
monitors check the discrete counterparts of the energy identity, the
Gronwall-type bound on the barotropic/baroclinic split, and exponential
decay.  Multiplicative constants in the continuous estimates are not
computable, so all pass criteria are identities, boundedness, or
stability-under-refinement, never absolute constants.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .fields import (
    AveragedField,
    PhysicalField,
    SpectralField,
    averaged_to_physical,
    fluctuation,
    grad_norm,
    l2_norm,
    lp_norm,
    sobolev_norm,
    to_physical,
    vertical_average,
)
from .nonlinear import F, NonlinearWorkspace, advect
from .projection import constrain, solve_surface_poisson
from .evolution import ForcingSpec, TrajectoryLedger, forcing_eval, zeros_spectral


@dataclass(frozen=True)
class EstimateRecord:
    """All monitored norms at one sample time (squared/raised as named)."""

    t: float
    e2: float        # ||v||^2_{L^2}
    d2: float        # ||grad v||^2_{L^2}
    grad_h_bar: float  # ||grad_H vbar||^2_{L^2(G)}
    vz2: float       # ||dz v||^2_{L^2}
    tilde4: float    # ||v - vbar||^4_{L^4}
    grad_pi: float   # ||grad_H pi||^2_{L^2(G)}
    vz3: float       # ||dz v||^3_{L^3}
    dtv2: float      # ||dt v||^2_{L^2}, centered differences of samples
    h1: float        # ||v||^2 in the H^1 surrogate
    h2: float        # ||v||^2 in the H^2 surrogate

    def __post_init__(self):
        for name, val in self.__dict__.items():
            if not (math.isfinite(val) and (val >= 0 or name == "t")):
                raise ConfigurationError(f"estimate record entry {name} = {val}")


def trajectory_pressure(state: SpectralField, f_field: SpectralField | None = None):
    """Surface pressure balancing the averaged momentum equation at this state."""
    g = state.grid
    lapv = SpectralField(g, -g.laplace_symbol[None] * state.coeffs)
    rhs = lapv - advect(state, state)
    if f_field is not None:
        rhs = rhs + f_field
    return solve_surface_poisson(vertical_average(rhs))


def _dz_field(state: SpectralField) -> PhysicalField:
    g = state.grid
    node = state.coeffs @ (-g.lam[:, None] * g.sin_table)
    vals = np.fft.ifft2(node, axes=(1, 2), norm="forward").real
    return PhysicalField(g, vals)


def tilde_values(state: SpectralField):
    """Pointwise fluctuation v - vbar on the collocation grid.

    The vertical average is subtracted as an exact z-constant (not through
    its truncated cosine representative), so no basis truncation error
    enters near the bottom boundary.
    """
    vb = vertical_average(state)
    return to_physical(state).values - averaged_to_physical(vb).values


def record(state: SpectralField, t, pi, dtv2=0.0) -> EstimateRecord:
    """Compute every monitored norm at one state (dtv2 supplied by the caller)."""
    g = state.grid
    vbar = vertical_average(state)
    grad_h_bar = float(np.sum(g.k2[None] * np.abs(vbar.coeffs) ** 2))
    vz2 = float(g.h / 2 * np.sum((g.lam**2)[None, None, None] * np.abs(state.coeffs) ** 2))
    tilde4 = lp_norm(PhysicalField(g, tilde_values(state)), 4) ** 4
    grad_pi = float(np.sum(g.k2 * np.abs(pi.coeffs) ** 2)) if pi is not None else 0.0
    vz3 = lp_norm(_dz_field(state), 3) ** 3
    return EstimateRecord(
        t=float(t),
        e2=l2_norm(state) ** 2,
        d2=grad_norm(state) ** 2,
        grad_h_bar=grad_h_bar,
        vz2=vz2,
        tilde4=tilde4,
        grad_pi=grad_pi,
        vz3=vz3,
        dtv2=float(dtv2),
        h1=sobolev_norm(state, 1) ** 2,
        h2=sobolev_norm(state, 2) ** 2,
    )


def build_records(ledger: TrajectoryLedger, forcing: ForcingSpec | None = None):
    """EstimateRecords along a sampled trajectory, with centered-difference dt v."""
    n = len(ledger.times)
    recs = []
    for i in range(n):
        t = ledger.times[i]
        state = ledger.states[i]
        if n >= 3 and 0 < i < n - 1:
            dv = ledger.states[i + 1] - ledger.states[i - 1]
            dtv2 = (l2_norm(dv) / (ledger.times[i + 1] - ledger.times[i - 1])) ** 2
        elif n >= 2:
            j = 1 if i == 0 else i
            dv = ledger.states[j] - ledger.states[j - 1]
            dtv2 = (l2_norm(dv) / (ledger.times[j] - ledger.times[j - 1])) ** 2
        else:
            dtv2 = 0.0
        f_field = forcing_eval(forcing, t) if forcing is not None else None
        pi = trajectory_pressure(state, f_field)
        recs.append(record(state, t, pi, dtv2))
    return recs


# -- energy budget --------------------------------------------------------


@dataclass(frozen=True)
class EnergyBudgetReport:
    residuals: tuple
    max_residual: float
    max_relative_residual: float
    monotone: bool


def energy_budget(ledger: TrajectoryLedger) -> EnergyBudgetReport:
    """Check E2(t) + 2 int_0^t D2 ds = E2(0) + 2 int_0^t <P f, v> ds.

    Uses the per-step accumulated integrals the integrator stored, so the
    check is independent of the sampling cadence.
    """
    e20 = ledger.e2[0]
    res = tuple(
        ledger.e2[i] + 2 * ledger.d2_int[i] - 2 * ledger.fwork_int[i] - e20
        for i in range(len(ledger))
    )
    mx = max(abs(r) for r in res)
    rel = mx / e20 if e20 > 0 else mx
    mono = all(b < a for a, b in zip(ledger.e2, ledger.e2[1:]))
    return EnergyBudgetReport(res, mx, rel, mono)


# -- Gronwall monitor -----------------------------------------------------


@dataclass(frozen=True)
class GronwallReport:
    phi: tuple
    phi_max: float
    bound: tuple          # Phi(0) * exp(int K1_hat), per sample
    dominated: bool       # Phi(t) <= bound(t) everywhere
    dissipation_integral: float
    max_jump_ratio: float


def _k1_surrogate(rec: EstimateRecord) -> float:
    # unit-constant stand-in for the Gronwall rate: grows with the solution
    # size in L^2 and H^1
    e = math.sqrt(rec.e2)
    h1 = math.sqrt(rec.h1)
    return (1 + e + e * e) * (h1 ** (2.0 / 3.0) + h1 + h1 * h1)


def gronwall_monitor(ledger: TrajectoryLedger, c3=1.0,
                     forcing: ForcingSpec | None = None,
                     records=None) -> GronwallReport:
    recs = build_records(ledger, forcing) if records is None else records
    phi = [8 * r.grad_h_bar + r.vz2 + (c3 / 4) * r.tilde4 for r in recs]
    k1 = [_k1_surrogate(r) for r in recs]
    times = ledger.times
    bound = [phi[0]]
    acc = 0.0
    for i in range(1, len(recs)):
        acc += 0.5 * (times[i] - times[i - 1]) * (k1[i] + k1[i - 1])
        bound.append(phi[0] * math.exp(min(acc, 700.0)))
    dominated = all(p <= b * (1 + 1e-9) + 1e-300 for p, b in zip(phi, bound))

    diss = 0.0
    prev = None
    for i, (t, state) in enumerate(zip(times, ledger.states)):
        g = state.grid
        grad_vz2 = float(
            g.h / 2 * np.sum(
                (g.lam**2)[None, None, None] * g.laplace_symbol[None]
                * np.abs(state.coeffs) ** 2
            )
        )
        mag2 = np.sum(tilde_values(state) ** 2, axis=0)
        gmag2 = _tilde_grad_magnitude_squared(state)
        mixed = float(np.sum((mag2 * gmag2) @ g.wq) / (g.nx * g.ny))
        integrand = recs[i].grad_pi + grad_vz2 + c3 * mixed
        if prev is not None:
            diss += 0.5 * (times[i] - times[i - 1]) * (prev + integrand)
        prev = integrand

    jumps = [
        max(p1, p0) / max(min(p1, p0), 1e-300)
        for p0, p1 in zip(phi, phi[1:])
        if max(p0, p1) > 0
    ]
    return GronwallReport(
        phi=tuple(phi),
        phi_max=max(phi),
        bound=tuple(bound),
        dominated=dominated,
        dissipation_integral=diss,
        max_jump_ratio=max(jumps) if jumps else 1.0,
    )


def _tilde_grad_magnitude_squared(state: SpectralField):
    """Pointwise |grad (v - vbar)|^2; the average contributes only to the
    horizontal derivatives and is subtracted as an exact z-constant."""
    g = state.grid
    kx = g.kx[:, None, None]
    ky = g.ky[None, :, None]
    vb = vertical_average(state)
    total = None
    for deriv, avg_deriv, table in (
        (2j * np.pi * kx * state.coeffs,
         2j * np.pi * g.kx[None, :, None] * vb.coeffs, g.cos_table),
        (2j * np.pi * ky * state.coeffs,
         2j * np.pi * g.ky[None, None, :] * vb.coeffs, g.cos_table),
        (state.coeffs, None, -g.lam[:, None] * g.sin_table),
    ):
        vals = np.fft.ifft2(deriv @ table, axes=(1, 2), norm="forward").real
        if avg_deriv is not None:
            vals = vals - averaged_to_physical(AveragedField(g, avg_deriv)).values
        part = np.sum(vals**2, axis=0)
        total = part if total is None else total + part
    return total


# -- decay fit ------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    rate: float
    amplitude: float
    residual: float


def decay_fit(ledger: TrajectoryLedger, quantity="e2", tail_fraction=0.5) -> DecayFit:
    """Least-squares fit of log(quantity) vs t on the trajectory tail."""
    times = np.asarray(ledger.times)
    if quantity in ("e2", "d2"):
        vals = np.asarray(getattr(ledger, quantity))
    else:
        raise ConfigurationError(f"unknown decay quantity {quantity!r}")
    start = int(len(times) * (1 - tail_fraction))
    t = times[start:]
    q = vals[start:]
    pos = q > 0
    if not pos.all():
        stop = int(np.argmin(pos))
        t, q = t[:stop], q[:stop]
    if len(t) < 10:
        raise ConfigurationError("decay fit needs >= 10 positive tail samples")
    coef, res = np.polynomial.polynomial.polyfit(t, np.log(q), 1, full=True)
    rate = -float(coef[1])
    amplitude = math.exp(float(coef[0]))
    residual = float(res[0][0]) if len(res[0]) else 0.0
    return DecayFit(rate, amplitude, residual)


# -- barotropic / baroclinic split ---------------------------------------


@dataclass(frozen=True)
class SplitResiduals:
    bar: float            # averaged-equation residual, L^2(G)
    tilde: float          # fluctuation-equation residual, L^2(Omega)
    recombination: float  # || lift(avg r) + fluct(r) - r ||, algebraic identity


def split_residuals(state: SpectralField, pi, dt_v: SpectralField | None = None,
                    f_field: SpectralField | None = None) -> SplitResiduals:
    """Residuals of the averaged and fluctuation momentum equations.

    With dt_v omitted, the semi-discrete right-hand side -Av + F(v) + Pf is
    used and both residuals vanish to rounding; along a marched trajectory
    pass dt_v from finite differences to test the integrator.
    """
    g = state.grid
    ws = NonlinearWorkspace(g)
    adv = advect(state, state, ws)
    lap = SpectralField(g, -g.laplace_symbol[None] * state.coeffs)
    f_field = f_field if f_field is not None else zeros_spectral(g)
    if dt_v is None:
        av = constrain(SpectralField(g, g.laplace_symbol[None] * constrain(state).coeffs))
        dt_v = -av - constrain(adv) + constrain(f_field)

    r_cos = dt_v + adv - lap - f_field
    r_bar = vertical_average(r_cos) + pi.gradient()
    r_tilde = fluctuation(r_cos)

    # in-basis lift of the average: the representative fluctuation subtracts
    a = g.avg_factor
    lift = vertical_average(r_cos).coeffs[..., None] * (a / np.sum(a**2))
    recomb = SpectralField(g, lift + r_tilde.coeffs) - r_cos

    scale = max(l2_norm(state), 1e-300)
    return SplitResiduals(
        bar=float(np.sqrt(np.sum(np.abs(r_bar.coeffs) ** 2))) / scale,
        tilde=l2_norm(r_tilde) / scale,
        recombination=l2_norm(recomb) / scale,
    )


def poincare_slack(ledger: TrajectoryLedger) -> float:
    """max over samples of lam_0^2 E2 - D2 (should be <= ~0)."""
    lam0sq = (0.5 * math.pi / ledger.grid.h) ** 2
    return max(lam0sq * e - d for e, d in zip(ledger.e2, ledger.d2))
