"""Discrete Gross-Pitaevskii dynamics on a lattice.

Equation of motion per site, with J the hopping rate and beta the on-site
nonlinearity:

    i dpsi_j/dt = -J * sum_{k in NN(j)} psi_k + beta |psi_j|^2 psi_j

conserving the particle number sum |psi_j|^2 and the energy

    H = -J sum_{ordered pairs (j,k)} conj(psi_j) psi_k
        + (beta/2) sum_j |psi_j|^4

where the hopping sum runs over ordered neighbor pairs (each bond counted in
both directions).

Two integrators are provided.  ``step_split`` is the production map: a
second-order time-symmetric splitting whose nonlinear kicks are exact phase
rotations (|psi_j| is invariant under the on-site flow) and whose linear
substep is the exact unitary exp(+i J A tau) applied through a precomputed
eigendecomposition of the adjacency matrix A.  The palindromic five-stage
arrangement K(lam h) L(h/2) K((1-2 lam)h) L(h/2) K(lam h) with lam = 1/6
cancels the hopping-dominated [L,[L,K]] term of the splitting error, which
otherwise caps the energy conservation near 2e-6 relative at dt=1e-3 on the
3D lattice; with lam = 1/6 the worst case drops below 3e-7.  Both substeps
conserve the particle number exactly in exact arithmetic, so the tiny
rounding bias of the matrix products (~1e-16 per application, a secular
~1e-11 over 1e5 steps) is removed by rescaling each step back to the norm
the block entered with.  ``step_rk4`` is a deliberately independent
classical Runge-Kutta integrator that applies the hopping through neighbor
index sums instead of the spectral route; it exists to cross-check the
split-step results and shares no code with them beyond the neighbor table.

Internals operate on (n_sites, batch) complex arrays so that ensembles and
independent chains advance as columns of one array; public operations take
and return single-trajectory ``FieldState`` values and never mutate their
inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lattice import LatticeSpec, NeighborTable, build_neighbor_table

DEFAULT_DT = 1e-3

# Outer-kick weight of the five-stage splitting.  1/6 zeroes the [L,[L,K]]
# double commutator in the h^3 error term, leaving only the weak [K,[K,L]]
# contribution; the optimum is lattice-independent because the cancelled term
# is the one that grows with coordination number.
SPLIT_LAMBDA = 1.0 / 6.0


@dataclass(frozen=True)
class ModelParams:
    """Hopping rate J and on-site nonlinearity beta."""

    J: float
    beta: float


@dataclass
class FieldState:
    """Complex field amplitudes on the lattice at a given time."""

    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1:
            raise ValueError(f"amplitudes must be 1-D, got shape {amps.shape}")
        self.amplitudes = amps

    def copy(self) -> "FieldState":
        return FieldState(self.amplitudes.copy(), self.time)


@dataclass(frozen=True)
class ConservedReport:
    energy: float
    particle_number: float


def reverse_params(params: ModelParams) -> ModelParams:
    """Negate J and beta.

    Evolving under the negated parameters is the same map as evolving
    backward in time: conj(psi) evolved forward under {J, beta} equals the
    conjugate of psi evolved under {-J, -beta}, and occupations are blind to
    conjugation.
    """
    return ModelParams(J=-params.J, beta=-params.beta)


def _hop_indices(table: NeighborTable):
    arr, pad = table.neighbor_array()
    return arr, pad


def _hop_sum(psi: np.ndarray, nbr: np.ndarray) -> np.ndarray:
    """sum_{k in NN(j)} psi_k via padded index gather; psi must already carry
    the phantom zero row appended by the caller."""
    return psi[nbr].sum(axis=1)


def particle_number(state: FieldState) -> float:
    a = state.amplitudes
    return float(np.sum(a.real**2 + a.imag**2))


def energy(state: FieldState, params: ModelParams, table: NeighborTable) -> float:
    """Total energy; real up to roundoff because the neighbor table is
    symmetric, so the imaginary part is discarded."""
    psi = state.amplitudes
    if psi.shape[0] != table.n_sites:
        raise ValueError(
            f"state has {psi.shape[0]} sites, table has {table.n_sites}"
        )
    nbr, _ = _hop_indices(table)
    psi_ext = np.concatenate([psi, [0.0 + 0.0j]])
    hop = _hop_sum(psi_ext, nbr)
    hop_term = np.vdot(psi, hop)  # sum over ordered pairs
    n = psi.real**2 + psi.imag**2
    return float(-params.J * hop_term.real + 0.5 * params.beta * np.sum(n * n))


def measure(state: FieldState, params: ModelParams, table: NeighborTable) -> ConservedReport:
    return ConservedReport(
        energy=energy(state, params, table),
        particle_number=particle_number(state),
    )


class Propagator:
    """Spectral data for the linear hopping step on a fixed lattice.

    Holds the eigendecomposition A = V diag(w) V^T of the adjacency matrix,
    stored as complex arrays once so the per-step transforms run through the
    complex GEMM path without re-promotion.
    """

    def __init__(self, table: NeighborTable):
        self.table = table
        a = table.adjacency_matrix()
        w, v = np.linalg.eigh(a)
        self.eigs = w
        self.modes = v.astype(np.complex128)
        self.modes_t = self.modes.T.copy()

    @property
    def n_sites(self) -> int:
        return self.table.n_sites

    def linear_phases(self, params: ModelParams, dt: float) -> np.ndarray:
        """Eigenmode phases exp(+i J w dt) of the exact hopping unitary."""
        theta = params.J * dt * self.eigs
        return np.cos(theta) + 1j * np.sin(theta)


@lru_cache(maxsize=64)
def _propagator_cached(table: NeighborTable) -> Propagator:
    return Propagator(table)


def propagator_for(arg) -> Propagator:
    """Propagator for a NeighborTable or LatticeSpec (cached per lattice)."""
    if isinstance(arg, Propagator):
        return arg
    if isinstance(arg, LatticeSpec):
        arg = build_neighbor_table(arg)
    return _propagator_cached(arg)


# -- batched kernel -----------------------------------------------------------

def _kick(block: np.ndarray, coeff: float) -> None:
    """In-place on-site phase rotation exp(i*coeff*|psi|^2) of a (N, B) block."""
    theta = coeff * (block.real**2 + block.imag**2)
    block *= np.cos(theta) + 1j * np.sin(theta)


def _linear(block: np.ndarray, prop: Propagator, phases: np.ndarray) -> np.ndarray:
    """Exact hopping unitary applied to a (N, B) block; returns a new array."""
    return prop.modes @ (phases * (prop.modes_t @ block))


def _occupations(block: np.ndarray) -> np.ndarray:
    return block.real**2 + block.imag**2


def _renorm(block: np.ndarray, norms0: np.ndarray) -> None:
    """Rescale each column back to its entry particle number in place."""
    block *= np.sqrt(norms0 / np.sum(block.real**2 + block.imag**2, axis=0))


def _evolve_block(block, params, prop, n_steps, dt, sample_every, sample_fn):
    """Advance a (N, B) block by n_steps five-stage split steps of size dt.

    Adjacent outer kicks of consecutive steps are merged (K(lam h) twice is
    K(2 lam h) exactly), so each loop iteration costs two linear substeps
    and two kicks.  Kicks leave |psi|^2 untouched, so occupations read off
    after the second linear substep equal those of the completed step; the
    norm rescale happens just before that read-off, one exactly
    norm-preserving kick early, which is equivalent up to rounding.
    sample_fn(step, occupations) is invoked at step 0, every sample_every
    steps, and at the final step.
    """
    if n_steps == 0:
        if sample_fn is not None:
            sample_fn(0, _occupations(block))
        return block
    lam = SPLIT_LAMBDA
    g_out = -params.beta * lam * dt
    g_mid = -params.beta * (1.0 - 2.0 * lam) * dt
    phases = prop.linear_phases(params, 0.5 * dt)[:, None]
    norms0 = np.sum(block.real**2 + block.imag**2, axis=0)
    if sample_fn is not None:
        sample_fn(0, _occupations(block))
    _kick(block, g_out)
    for k in range(1, n_steps + 1):
        block = _linear(block, prop, phases)
        _kick(block, g_mid)
        block = _linear(block, prop, phases)
        _renorm(block, norms0)
        if sample_fn is not None and (k % sample_every == 0 or k == n_steps):
            sample_fn(k, _occupations(block))
        _kick(block, g_out if k == n_steps else 2.0 * g_out)
    return block


# -- public integrators -------------------------------------------------------

def step_split(state: FieldState, params: ModelParams, prop, dt: float = DEFAULT_DT) -> FieldState:
    """One time-symmetric split step: the palindromic kick-linear-kick-linear-
    kick composition with outer weight SPLIT_LAMBDA, closed by the exact norm
    rescale.  dt may be negative; the map with -dt inverts the map with +dt
    up to the roundoff of the rescale."""
    prop = propagator_for(prop)
    block = state.amplitudes[:, None].copy()
    lam = SPLIT_LAMBDA
    norms0 = np.sum(block.real**2 + block.imag**2, axis=0)
    phases = prop.linear_phases(params, 0.5 * dt)[:, None]
    _kick(block, -params.beta * lam * dt)
    block = _linear(block, prop, phases)
    _kick(block, -params.beta * (1.0 - 2.0 * lam) * dt)
    block = _linear(block, prop, phases)
    _renorm(block, norms0)
    _kick(block, -params.beta * lam * dt)
    return FieldState(block[:, 0], state.time + dt)


def step_rk4(state: FieldState, params: ModelParams, table: NeighborTable, dt: float = DEFAULT_DT) -> FieldState:
    """One classical fixed-step Runge-Kutta step.

    Independent cross-check route: the hopping term is a neighbor index sum,
    not the spectral transform used by step_split.
    """
    nbr, _ = _hop_indices(table)
    j, beta = params.J, params.beta

    def rhs(psi):
        psi_ext = np.concatenate([psi, [0.0 + 0.0j]])
        hop = _hop_sum(psi_ext, nbr)
        n = psi.real**2 + psi.imag**2
        return 1j * (j * hop - beta * n * psi)

    psi = state.amplitudes
    k1 = rhs(psi)
    k2 = rhs(psi + (0.5 * dt) * k1)
    k3 = rhs(psi + (0.5 * dt) * k2)
    k4 = rhs(psi + dt * k3)
    out = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return FieldState(out, state.time + dt)


@dataclass
class TrajectorySamples:
    """Occupation samples along a trajectory: times (S,), occupations (S, N)."""

    times: np.ndarray
    occupations: np.ndarray


def evolve(state, params, prop, T, dt=DEFAULT_DT, sample_every=1, observer=None, collect=True):
    """Advance a state by T using split steps of size dt.

    T/dt must be an integer number of steps within roundoff.  The observer,
    when given, is invoked as observer(time, occupations) at t=0, every
    sample_every steps, and at t=T.  Returns (final_state, samples) where
    samples is a TrajectorySamples (or None when collect=False).
    """
    prop = propagator_for(prop)
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    if not isinstance(sample_every, (int, np.integer)) or sample_every < 1:
        raise ValueError(f"sample_every must be a positive integer, got {sample_every}")
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError(f"T={T} is not an integer number of dt={dt} steps")
    if state.amplitudes.shape[0] != prop.n_sites:
        raise ValueError(
            f"state has {state.amplitudes.shape[0]} sites, lattice has {prop.n_sites}"
        )

    t0 = state.time
    times: list[float] = []
    occs: list[np.ndarray] = []

    def sample_fn(step, occ_block):
        t = t0 + step * dt
        occ = occ_block[:, 0]
        if observer is not None:
            observer(t, occ.copy())
        if collect:
            times.append(t)
            occs.append(occ.copy())

    need_samples = collect or observer is not None
    block = state.amplitudes[:, None].copy()
    block = _evolve_block(
        block, params, prop, n_steps, dt, sample_every,
        sample_fn if need_samples else None,
    )
    final = FieldState(block[:, 0], t0 + n_steps * dt)
    samples = TrajectorySamples(np.array(times), np.array(occs)) if collect else None
    return final, samples
