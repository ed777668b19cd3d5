"""Loschmidt echo protocol for occupation-space deviations.

A realization starts from a random field on the constant-(E, N_p) shell
(see shell_state; the equal-occupation construction initial_state is kept
for controlled tests), evolves forward for tau recording the occupations on
a fixed sample grid, then negates {J, beta} (equivalent to running time backward, up
to an overall conjugation that occupations cannot see), adds an isotropic
perturbation of 2-norm exactly epsilon in the 2N-dimensional real embedding
of the field, and evolves for another tau.  At every sample time dt after
the reversal it forms

    dn_i(dt) = n_i(tau + dt) - n_i(tau - dt)

against the stored forward samples at the exactly matching grid times and
records ln sqrt(sum_i dn_i^2).

The echo grid starts at the first post-reversal sample (dt equal to the
sampling interval); the dt=0 point is excluded so that epsilon=0 echoes stay
finite-free rather than hitting ln 0.  Realizations are internally evolved
as column batches of one array; the public run_echo is the single-column
case of the same kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from scipy.optimize import brentq

from .dynamics import (
    FieldState,
    ModelParams,
    Propagator,
    _evolve_block,
    energy,
    propagator_for,
    reverse_params,
)
from .lattice import LatticeSpec, build_neighbor_table


@dataclass(frozen=True)
class EchoProtocol:
    """Echo run parameters.

    tau must be an integer multiple of dt*sample_every so the reversal point
    and every comparison time land exactly on the sample grid.
    """

    tau: float = 60.0
    dt: float = 1e-3
    sample_every: int = 10
    epsilon: float = 1e-8
    n0: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not isinstance(self.sample_every, (int, np.integer)) or self.sample_every < 1:
            raise ValueError(
                f"sample_every must be a positive integer, got {self.sample_every}"
            )
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.n0 <= 0:
            raise ValueError(f"n0 must be positive, got {self.n0}")
        interval = self.dt * self.sample_every
        k = round(self.tau / interval)
        if k < 1 or abs(k * interval - self.tau) > 1e-9 * max(1.0, self.tau):
            raise ValueError(
                f"tau={self.tau} must be an integer multiple of "
                f"dt*sample_every={interval}"
            )

    @property
    def n_samples(self) -> int:
        """Number of post-reversal comparison times."""
        return round(self.tau / (self.dt * self.sample_every))

    @property
    def steps_per_sample(self) -> int:
        return self.sample_every


@dataclass
class EchoRecord:
    """One echo realization: log deviations on the post-reversal grid."""

    dt_grid: np.ndarray
    log_deviation: np.ndarray
    realized_energy: float
    seed: int


def initial_state(spec: LatticeSpec, n0: float, rng: np.random.Generator) -> FieldState:
    """Equal occupations n0 with independent uniform random phases."""
    phases = 2.0 * np.pi * rng.random(spec.n_sites)
    return FieldState(np.sqrt(n0) * np.exp(1j * phases), 0.0)


# Acceptance band width (energy excess per site) for shell_state draws.  Only
# draws landing within [0, _SHELL_BAND] above the target shell are kept, so the
# mix toward uniform that lands them exactly on the shell stays below ~2% and
# the accepted fields keep the thermal (exponential) occupation statistics.
# Compressing the occupation fluctuations any harder measurably suppresses the
# rare fast-growing realizations that dominate the annealed deviation growth
# in the non-ergodized 1D chain.
_SHELL_BAND = 2.0


def shell_state(
    spec: LatticeSpec,
    params: ModelParams,
    n0: float,
    rng: np.random.Generator,
    energy_per_site: float | None = None,
    max_draws: int = 2000,
) -> FieldState:
    """Random field on the constant-(E, N_p) shell.

    Occupations start as squared moduli of a complex Gaussian field with
    mean n0 (so their distribution is exponential, the thermal field value),
    rescaled so N_p = n0 * n_sites holds exactly.  Draws are rejected unless
    the total energy lands within a narrow band just above the target shell
    E = energy_per_site * n_sites (default beta * n0**2, the value the
    interaction term takes for a thermal field).  An accepted profile is then
    mixed toward uniform occupations, n_s = n0 + (1-s)(n - n0) with the
    phases as drawn, by the root s in [0, 1] that puts the total energy
    exactly on the shell.  The band keeps s small (about 0.02 at most), so
    the returned field sits exactly on the shell while retaining the
    occupation-fluctuation statistics of an unconstrained thermal draw.
    Mixing preserves N_p identically.  Acceptance runs one to a few percent
    per draw depending on the lattice, hence the generous max_draws.
    """
    if n0 <= 0:
        raise ValueError(f"n0 must be positive, got {n0}")
    target_per_site = params.beta * n0**2 if energy_per_site is None else energy_per_site
    n_sites = spec.n_sites
    target = target_per_site * n_sites
    table = build_neighbor_table(spec)

    for _ in range(max_draws):
        z = rng.standard_normal(2 * n_sites)
        w = (z[:n_sites] + 1j * z[n_sites:]) * np.sqrt(n0 / 2.0)
        occ = w.real**2 + w.imag**2
        occ *= (n0 * n_sites) / occ.sum()
        phase = w / np.abs(w)

        def field_at(s):
            return FieldState(np.sqrt(n0 + (1.0 - s) * (occ - n0)) * phase, 0.0)

        def excess(s):
            return energy(field_at(s), params, table) - target

        hi = excess(0.0)
        if not 0.0 <= hi <= _SHELL_BAND * n_sites:
            continue
        if hi == 0.0:
            return field_at(0.0)
        if excess(1.0) > 0.0:
            continue
        s_root = brentq(excess, 0.0, 1.0, xtol=1e-13)
        return field_at(s_root)
    raise RuntimeError(
        f"no draw reached the E = {target_per_site} * n_sites shell in {max_draws} attempts"
    )


def perturb(state: FieldState, epsilon: float, rng: np.random.Generator) -> FieldState:
    """Add an isotropic perturbation of 2-norm exactly epsilon.

    The direction is drawn uniformly on the unit sphere of the 2N real
    embedding (real parts then imaginary parts of the per-site shifts) and
    rescaled so the norm equals epsilon to the last bit the division allows.
    epsilon=0 returns the state unchanged (no draw is consumed).
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    if epsilon == 0.0:
        return state.copy()
    n = state.amplitudes.shape[0]
    z = rng.standard_normal(2 * n)
    delta = z[:n] + 1j * z[n:]
    delta *= epsilon / np.linalg.norm(delta)
    return FieldState(state.amplitudes + delta, state.time)


def _energy_block(block: np.ndarray, params: ModelParams, prop: Propagator) -> np.ndarray:
    """Energy of each column of a (N, B) block via neighbor sums."""
    nbr, _ = prop.table.neighbor_array()
    ext = np.concatenate([block, np.zeros((1, block.shape[1]), dtype=block.dtype)])
    hop = ext[nbr].sum(axis=1)
    occ = block.real**2 + block.imag**2
    hop_term = np.sum((block.conj() * hop).real, axis=0)
    return -params.J * hop_term + 0.5 * params.beta * np.sum(occ * occ, axis=0)


def run_echo_block(spec, params, protocol, seeds, prop=None):
    """Run one echo realization per seed, advanced together as columns.

    Returns (dt_grid, log_deviation (B, K), realized_energy (B,)).  Column b
    reproduces run_echo with protocol.seed = seeds[b] up to floating-point
    roundoff of the shared matrix products.
    """
    prop = propagator_for(prop if prop is not None else spec)
    n = spec.n_sites
    if prop.n_sites != n:
        raise ValueError("propagator lattice does not match spec")
    seeds = list(seeds)
    b = len(seeds)
    rngs = [np.random.default_rng(s) for s in seeds]

    psi = np.empty((n, b), dtype=np.complex128)
    for j, rng in enumerate(rngs):
        psi[:, j] = shell_state(spec, params, protocol.n0, rng).amplitudes
    energies = _energy_block(psi, params, prop)

    k_samples = protocol.n_samples
    s = protocol.sample_every
    n_steps = k_samples * s
    fwd = np.empty((k_samples + 1, n, b))

    def record_forward(step, occ):
        fwd[step // s] = occ

    psi = _evolve_block(psi, params, prop, n_steps, protocol.dt, s, record_forward)

    # isotropic kick of exact norm epsilon per realization
    if protocol.epsilon > 0.0:
        for j, rng in enumerate(rngs):
            z = rng.standard_normal(2 * n)
            delta = z[:n] + 1j * z[n:]
            psi[:, j] += delta * (protocol.epsilon / np.linalg.norm(delta))

    log_dev = np.empty((b, k_samples))

    def record_echo(step, occ):
        k = step // s
        if k == 0:
            return
        dn = occ - fwd[k_samples - k]
        with np.errstate(divide="ignore"):
            log_dev[:, k - 1] = 0.5 * np.log(np.sum(dn * dn, axis=0))

    _evolve_block(psi, reverse_params(params), prop, n_steps, protocol.dt, s, record_echo)

    dt_grid = np.arange(1, k_samples + 1) * (protocol.dt * protocol.sample_every)
    return dt_grid, log_dev, energies


def run_echo(spec: LatticeSpec, params: ModelParams, protocol: EchoProtocol, prop=None) -> EchoRecord:
    """One echo realization seeded from protocol.seed."""
    dt_grid, log_dev, energies = run_echo_block(
        spec, params, protocol, [protocol.seed], prop=prop
    )
    return EchoRecord(
        dt_grid=dt_grid,
        log_deviation=log_dev[0],
        realized_energy=float(energies[0]),
        seed=protocol.seed,
    )
