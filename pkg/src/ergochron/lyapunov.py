"""Tangent-space Lyapunov analysis of the lattice dynamics.

The linearization of the equation of motion around a reference trajectory is

    i d(dpsi_j)/dt = -J sum_{k in NN(j)} dpsi_k
                     + beta (2 |psi_j|^2 dpsi_j + psi_j^2 conj(dpsi_j))

and the tangent integrator used here is the exact Jacobian of the split-step
field map: each nonlinear kick stage contributes its analytic derivative and
the linear substeps are the same hopping unitary, so tangent and
finite-difference trajectories agree to the finite-difference truncation
floor rather than to a separate integration error.  The reference trajectory
is rescaled to its entry norm each step exactly like the field kernel; the
rescale's Jacobian is a radial projection acting at rounding scale (the
linearized flow conserves Re<psi, delta> exactly), so the tangent block
omits it.

Local stretching rates are sampled on a coarse grid dt_r: every dt_r the
tangent norm is recorded and the vector renormalized,

    lambda_i = ln(|delta(t_i)| / |delta(t_{i-1})|) / dt_r,

giving the largest Lyapunov exponent as the long-time mean and the
fluctuation statistics (variance, autocorrelation phi, and its integral
time tau_erg = integral phi / phi(0)) that the ergodization-time relations
consume.  Independent chains evolve as columns of one array; chains are
pooled only by averaging per-chain statistics in fixed index order.

A two-trajectory variant (evolve a sibling displaced by 1e-8, renormalize
the separation every dt_r) is retained as a method oracle for the tangent
route.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (
    SPLIT_LAMBDA,
    FieldState,
    ModelParams,
    _evolve_block,
    _linear,
    propagator_for,
)
from .echo import shell_state
from .lattice import LatticeSpec

DEFAULT_DT_R = 0.1


class TailConvergenceError(RuntimeError):
    """The autocorrelation never settled into the noise band (heavy tail)."""


@dataclass
class StretchSeries:
    """Local stretching rates on the renormalization grid dt_r."""

    dt_r: float
    rates: np.ndarray
    burn_in_dropped: int = 0

    def __post_init__(self):
        self.rates = np.asarray(self.rates, dtype=float)
        if self.rates.ndim != 1:
            raise ValueError("rates must be a 1-D series")
        if self.dt_r <= 0:
            raise ValueError(f"dt_r must be positive, got {self.dt_r}")


@dataclass
class TauErgResult:
    """Integral autocorrelation time with its supporting pieces."""

    value: float
    stderr: float
    cutoff_lag: int
    integral: float


def _tangent_kick(psi, delta, beta, g):
    """Exact Jacobian of the on-site kick of duration g, advancing both the
    (N, B) reference block and its tangent block."""
    n = psi.real**2 + psi.imag**2
    theta = -beta * g * n
    phase = np.cos(theta) + 1j * np.sin(theta)
    delta = phase * (delta - 1j * beta * g * (n * delta + psi * psi * np.conj(delta)))
    return phase * psi, delta


def _evolve_pair_block(psi, delta, params, prop, n_steps, dt):
    """Advance reference and tangent blocks by n_steps five-stage split steps,
    with the same kick fusion and per-step norm rescale as the field kernel
    (the kick Jacobians compose identically; the rescale applies to the
    reference only)."""
    if n_steps == 0:
        return psi, delta
    lam = SPLIT_LAMBDA
    g_out = lam * dt
    g_mid = (1.0 - 2.0 * lam) * dt
    phases = prop.linear_phases(params, 0.5 * dt)[:, None]
    norms0 = np.sum(psi.real**2 + psi.imag**2, axis=0)
    psi, delta = _tangent_kick(psi, delta, params.beta, g_out)
    for k in range(1, n_steps + 1):
        psi = _linear(psi, prop, phases)
        delta = _linear(delta, prop, phases)
        psi, delta = _tangent_kick(psi, delta, params.beta, g_mid)
        psi = _linear(psi, prop, phases)
        delta = _linear(delta, prop, phases)
        psi *= np.sqrt(norms0 / np.sum(psi.real**2 + psi.imag**2, axis=0))
        psi, delta = _tangent_kick(psi, delta, params.beta,
                                   g_out if k == n_steps else 2.0 * g_out)
    return psi, delta


def tangent_step(state: FieldState, delta: np.ndarray, params: ModelParams, prop, dt: float) -> np.ndarray:
    """One split step of the tangent vector along the reference trajectory.

    Returns the advanced tangent vector; the tangent map is the exact
    derivative of the field map step_split, so advancing the reference with
    step_split and the tangent with tangent_step keeps the pair consistent
    to machine precision (not just to integration order).
    """
    prop = propagator_for(prop)
    psi = state.amplitudes[:, None].copy()
    d = np.asarray(delta, dtype=np.complex128)[:, None].copy()
    _, d = _evolve_pair_block(psi, d, params, prop, 1, dt)
    return d[:, 0]


def _steps_per_sample(dt, dt_r):
    r = round(dt_r / dt)
    if r < 1 or abs(r * dt - dt_r) > 1e-9 * dt_r:
        raise ValueError(f"dt_r={dt_r} must be an integer multiple of dt={dt}")
    return r


def _collect_rates(psi, delta, params, prop, n_samples, r_steps, dt, dt_r, rates_out):
    """Advance blocks n_samples renormalization intervals, filling
    rates_out (n_samples, B) and renormalizing delta in place at each."""
    for i in range(n_samples):
        psi, delta = _evolve_pair_block(psi, delta, params, prop, r_steps, dt)
        norms = np.sqrt(np.sum(delta.real**2 + delta.imag**2, axis=0))
        rates_out[i] = np.log(norms) / dt_r
        delta /= norms[None, :]
    return psi, delta


def stretching_ensemble(spec, params, T, dt, dt_r, seeds, burn_in=None, n0=100.0):
    """Stretching-rate series for several independent chains.

    T is the productive duration of EACH chain (burn-in comes on top).  All
    chains advance together as columns; burn_in=None triggers the automatic
    policy: a 30-time-unit pre-run estimates lambda from its second half and
    the total discarded span is 50/lambda_estimate (clamped to [10, 200]),
    shared by all columns so they stay in lock-step.
    """
    prop = propagator_for(spec)
    n = spec.n_sites
    c = len(seeds)
    if c < 1:
        raise ValueError("need at least one chain seed")
    r_steps = _steps_per_sample(dt, dt_r)

    psi = np.empty((n, c), dtype=np.complex128)
    delta = np.empty((n, c), dtype=np.complex128)
    for j, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        psi[:, j] = shell_state(spec, params, n0, rng).amplitudes
        z = rng.standard_normal(2 * n)
        d = z[:n] + 1j * z[n:]
        delta[:, j] = d / np.linalg.norm(d)

    if burn_in is None:
        pre_samples = int(round(30.0 / dt_r))
        pre = np.empty((pre_samples, c))
        psi, delta = _collect_rates(psi, delta, params, prop, pre_samples, r_steps, dt, dt_r, pre)
        lam_hat = float(np.mean(pre[pre_samples // 2:]))
        burn_total = min(max(50.0 / max(lam_hat, 1e-12), 10.0), 200.0)
        extra = max(0, int(round((burn_total - 30.0) / dt_r)))
        dropped = pre_samples + extra
        if extra:
            tail = np.empty((extra, c))
            psi, delta = _collect_rates(psi, delta, params, prop, extra, r_steps, dt, dt_r, tail)
    else:
        if burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {burn_in}")
        dropped = int(round(burn_in / dt_r))
        if dropped:
            waste = np.empty((dropped, c))
            psi, delta = _collect_rates(psi, delta, params, prop, dropped, r_steps, dt, dt_r, waste)

    n_samples = int(round(T / dt_r))
    if n_samples < 1:
        raise ValueError(f"T={T} shorter than one dt_r={dt_r} interval")
    rates = np.empty((n_samples, c))
    _collect_rates(psi, delta, params, prop, n_samples, r_steps, dt, dt_r, rates)
    return [
        StretchSeries(dt_r=dt_r, rates=rates[:, j].copy(), burn_in_dropped=dropped)
        for j in range(c)
    ]


def stretching_rates(spec, params, T, dt=1e-3, dt_r=DEFAULT_DT_R, seed=0, burn_in=None, n0=100.0) -> StretchSeries:
    """Single-chain stretching-rate series (one column of the batched path)."""
    return stretching_ensemble(spec, params, T, dt, dt_r, [seed], burn_in=burn_in, n0=n0)[0]


def benettin_rates(spec, params, T, dt=1e-3, dt_r=DEFAULT_DT_R, seed=0, offset=1e-8, burn_in=50.0, n0=100.0) -> StretchSeries:
    """Two-trajectory stretching rates: a sibling trajectory offset by
    ``offset`` is evolved alongside the reference and the separation is
    renormalized back to ``offset`` every dt_r.  Method oracle for the
    tangent route; shares the field integrator but no tangent code.
    """
    prop = propagator_for(spec)
    n = spec.n_sites
    rng = np.random.default_rng(seed)
    psi = shell_state(spec, params, n0, rng).amplitudes
    z = rng.standard_normal(2 * n)
    d = z[:n] + 1j * z[n:]
    d *= offset / np.linalg.norm(d)
    block = np.stack([psi, psi + d], axis=1)

    r_steps = _steps_per_sample(dt, dt_r)
    n_burn = int(round(burn_in / dt_r))
    n_samples = int(round(T / dt_r))
    rates = np.empty(n_samples)

    for i in range(-n_burn, n_samples):
        # the shared field kernel rescales each column to the norm it enters
        # the renormalization interval with, which is what the sibling needs:
        # its norm is reset below when the separation is pulled back
        block = _evolve_block(block, params, prop, r_steps, dt, r_steps, None)
        sep = block[:, 1] - block[:, 0]
        dist = np.linalg.norm(sep)
        if i >= 0:
            rates[i] = np.log(dist / offset) / dt_r
        block[:, 1] = block[:, 0] + sep * (offset / dist)
    return StretchSeries(dt_r=dt_r, rates=rates, burn_in_dropped=n_burn)


def _as_series_list(series) -> list:
    if isinstance(series, StretchSeries):
        return [series]
    out = list(series)
    if not out:
        raise ValueError("empty series list")
    if len({s.dt_r for s in out}) != 1:
        raise ValueError("all chains must share dt_r")
    return out


def lambda_max(series) -> tuple[float, float]:
    """Largest Lyapunov exponent as the mean stretching rate.

    For a single chain the standard error comes from batch means (32
    batches); for a chain list, from the scatter of per-chain means.
    """
    chains = _as_series_list(series)
    if len(chains) == 1:
        rates = chains[0].rates
        m = len(rates)
        if m < 2:
            return float(np.mean(rates)), 0.0
        n_batches = min(32, max(2, m // 4))
        usable = (m // n_batches) * n_batches
        means = rates[:usable].reshape(n_batches, -1).mean(axis=1)
        return float(np.mean(rates)), float(np.std(means, ddof=1) / np.sqrt(n_batches))
    means = np.array([np.mean(s.rates) for s in chains])
    return float(np.mean(means)), float(np.std(means, ddof=1) / np.sqrt(len(means)))


def variance_dlambda(series) -> tuple[float, float]:
    """Variance of the stretching-rate fluctuations <dlambda^2> at the
    series' own coarse-graining dt_r, with a chain- or batch-based stderr."""
    chains = _as_series_list(series)
    if len(chains) == 1:
        rates = chains[0].rates
        m = len(rates)
        v = float(np.var(rates))
        if m < 8:
            return v, 0.0
        n_batches = min(32, max(2, m // 4))
        usable = (m // n_batches) * n_batches
        blocks = rates[:usable].reshape(n_batches, -1)
        bvars = blocks.var(axis=1)
        return v, float(np.std(bvars, ddof=1) / np.sqrt(n_batches))
    # per-chain variances around per-chain means, pooled
    vs = np.array([np.var(s.rates) for s in chains])
    return float(np.mean(vs)), float(np.std(vs, ddof=1) / np.sqrt(len(vs)))


def autocorrelation(series: StretchSeries, max_lag: int) -> np.ndarray:
    """phi(k*dt_r) = (1/(M-k)) sum_i dlambda_i dlambda_{i+k} for k=0..max_lag,
    with dlambda the deviation from the series mean.

    max_lag must stay below a tenth of the series length; beyond that the
    estimator's own noise dominates anything it could resolve.
    """
    rates = series.rates
    m = len(rates)
    if max_lag < 0:
        raise ValueError("max_lag must be >= 0")
    if 10 * max_lag >= m:
        raise ValueError(
            f"max_lag={max_lag} too coarse for a series of {m} samples "
            f"(need max_lag < length/10)"
        )
    d = rates - rates.mean()
    phi = np.empty(max_lag + 1)
    for k in range(max_lag + 1):
        phi[k] = np.dot(d[: m - k], d[k:]) / (m - k)
    return phi


def autocorrelation_pooled(chains, max_lag: int):
    """Per-chain autocorrelations averaged in chain order; returns
    (phi_mean, phi_stderr) with the stderr from the chain scatter."""
    chains = _as_series_list(chains)
    phis = np.stack([autocorrelation(s, max_lag) for s in chains])
    mean = phis.mean(axis=0)
    if len(chains) < 2:
        return mean, np.full_like(mean, np.nan)
    return mean, phis.std(axis=0, ddof=1) / np.sqrt(len(chains))


def tau_erg_integral(phi: np.ndarray, dt_r: float, phi_stderr=None, run_length: int = 10) -> TauErgResult:
    """Integral autocorrelation time tau = (integral_0^tc phi) / phi(0).

    The cutoff tc is the first lag from which ``run_length`` consecutive
    values stay inside +-2x the tail noise floor (floor = rms of the last
    quarter of the grid); integrating past it would accumulate noise.
    Raises TailConvergenceError when no such lag exists within the grid,
    the signature of a too-short grid or a heavy correlation tail.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 1 or len(phi) < run_length + 2:
        raise ValueError(f"phi grid too short for run_length={run_length}")
    if phi[0] <= 0:
        raise ValueError(f"phi(0) must be positive, got {phi[0]}")
    tail = phi[-max(run_length, len(phi) // 4):]
    floor = float(np.sqrt(np.mean(tail**2)))
    band = 2.0 * floor
    inside = np.abs(phi) <= band
    cutoff = None
    for k in range(1, len(phi) - run_length + 1):
        if inside[k : k + run_length].all():
            cutoff = k
            break
    if cutoff is None:
        raise TailConvergenceError(
            f"autocorrelation never settled into the +-{band:.3e} noise band "
            f"for {run_length} consecutive lags within {len(phi) - 1} lags"
        )
    integral = float(np.trapezoid(phi[: cutoff + 1], dx=dt_r))
    value = integral / phi[0]
    stderr = float("nan")
    if phi_stderr is not None:
        s = np.asarray(phi_stderr, dtype=float)[: cutoff + 1]
        w = np.full(cutoff + 1, dt_r)
        w[0] = w[-1] = 0.5 * dt_r
        var_integral = float(np.sum((w * s) ** 2))
        # first-order propagation, phi(0) correlation with the integral ignored
        var_value = var_integral / phi[0] ** 2 + (integral * s[0] / phi[0] ** 2) ** 2
        stderr = float(np.sqrt(var_value))
    return TauErgResult(value=value, stderr=stderr, cutoff_lag=cutoff, integral=integral)


def tau_erg_eq4(series, max_lag: int = 100) -> TauErgResult:
    """Ergodization time as the normalized integral of the stretching-rate
    autocorrelation, pooled over chains when a list is given."""
    chains = _as_series_list(series)
    phi, stderr = autocorrelation_pooled(chains, max_lag)
    if len(chains) < 2:
        stderr = None
    return tau_erg_integral(phi, chains[0].dt_r, phi_stderr=stderr)


@dataclass
class LyapunovSummary:
    """Pooled direct-route results: exponent, fluctuation variance, the
    autocorrelation grid, and the integral ergodization time, each with a
    standard error (phi_stderr per lag)."""

    dt_r: float
    lambda_max: float
    lambda_stderr: float
    var_dlambda: float
    var_stderr: float
    phi: np.ndarray
    phi_stderr: np.ndarray
    tau_erg_eq4: float
    tau_stderr: float
    tau_cutoff_lag: int

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.phi_stderr = np.asarray(self.phi_stderr, dtype=float)
        if self.phi[0] != self.var_dlambda:
            raise ValueError("phi(0) must equal var_dlambda exactly")
        if np.any(np.abs(self.phi) > self.phi[0]):
            raise ValueError("|phi(k)| exceeded phi(0); series too short to pool")


def lyapunov_summary(series, max_lag: int = 100) -> LyapunovSummary:
    """Pool chains into a LyapunovSummary; var_dlambda is phi(0) by
    construction so the summary's identity invariant holds bit-exactly."""
    chains = _as_series_list(series)
    lam, lam_err = lambda_max(chains)
    phi, phi_err = autocorrelation_pooled(chains, max_lag)
    tau = tau_erg_integral(phi, chains[0].dt_r, phi_stderr=phi_err if len(chains) > 1 else None)
    return LyapunovSummary(
        dt_r=chains[0].dt_r,
        lambda_max=lam,
        lambda_stderr=lam_err,
        var_dlambda=float(phi[0]),
        var_stderr=float(phi_err[0]) if len(chains) > 1 else float("nan"),
        phi=phi,
        phi_stderr=phi_err,
        tau_erg_eq4=tau.value,
        tau_stderr=tau.stderr,
        tau_cutoff_lag=tau.cutoff_lag,
    )
