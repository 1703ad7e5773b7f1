"""Rotating-frame Hamiltonian, conserved-weight blocks and propagation.

Frame choice, documented once and relied on everywhere: the lab-frame
Hamiltonian contains free evolution at omega_r (radial mode a) and
omega_s ~ 2 omega_r (axial mode c), MHz scales that would force ns steps.
We work in the interaction frame rotating at omega_r for mode a and at
2 omega_r for mode c, which leaves

    H / hbar = delta * c^dag c + xi * (a^dag^2 c + a^2 c^dag),

with delta = omega_s - 2 omega_r. The coupling term is invariant under this
rotation (the 2 omega_r phase of a^dag^2 cancels against the one of c), so
populations and eigenvalue differences -- everything this package reports --
are unchanged, while step sizes are set by kHz scales.

H commutes exactly with K = a^dag a + 2 c^dag c, so evolution is computed
per K sector: dense full-space cost O(D^3) becomes a sum of small cubes.

Time-dependent detuning ramps are propagated as piecewise-constant
Hamiltonians with the exact per-step exponential (eigendecomposition of the
real-symmetric sector matrix, delta sampled at the step midpoint). Every
step is exactly unitary; accuracy is certified by the step-halving
convergence contract rather than by an adaptive integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import NumericalContractError, StepPolicyError, TruncationLeakError
from .fock import (
    GUARD_LEAK_THRESHOLD,
    FockDim,
    Operator,
    StateVector,
    TwoModeSpace,
    guard_leak,
    mode_operator,
)

# eigendecomposition cache resolution for the detuning key, rad/s
DELTA_CACHE_RESOLUTION = 1e-3


@dataclass(frozen=True)
class SectorBlock:
    """Basis slice of one K = n_a + 2 n_c sector.

    States are ordered by increasing n_c; `coupling` holds the matrix of
    (a^dag^2 c + a^2 c^dag) restricted to the sector and `n_c_diag` the
    diagonal of c^dag c.
    """

    k: int
    indices: np.ndarray
    n_c_diag: np.ndarray
    coupling: np.ndarray

    @property
    def size(self) -> int:
        return self.indices.size

    def hamiltonian(self, xi: float, delta: float) -> np.ndarray:
        h = xi * self.coupling.copy()
        h[np.diag_indices(self.size)] += delta * self.n_c_diag
        return h


@dataclass(frozen=True)
class BlockDecomposition:
    space: TwoModeSpace
    blocks: tuple[SectorBlock, ...]

    def __post_init__(self):
        covered = np.concatenate([b.indices for b in self.blocks])
        if not np.array_equal(np.sort(covered), np.arange(self.space.dim)):
            raise ValueError("sectors do not partition the basis")

    @property
    def k_values(self) -> tuple[int, ...]:
        return tuple(b.k for b in self.blocks)

    def by_k(self, k: int) -> SectorBlock:
        for b in self.blocks:
            if b.k == k:
                return b
        raise KeyError(f"no K = {k} sector in this space")


@lru_cache(maxsize=32)
def block_decompose(space: TwoModeSpace) -> BlockDecomposition:
    """Partition the basis by the conserved weight K = n_a + 2 n_c."""
    dr, da = space.radial.dim, space.axial.dim
    blocks = []
    for k in range(dr - 1 + 2 * (da - 1) + 1):
        j_lo = max(0, -(-(k - dr + 1) // 2))  # ceil((k - dr + 1) / 2)
        j_hi = min(k // 2, da - 1)
        js = np.arange(j_lo, j_hi + 1)
        if js.size == 0:
            continue
        indices = np.array([space.index(k - 2 * j, j) for j in js])
        coupling = np.zeros((js.size, js.size))
        for pos in range(1, js.size):
            j = js[pos]
            n_a = k - 2 * j
            # <n_a + 2, j - 1| a^dag^2 c |n_a, j>
            amp = math.sqrt((n_a + 1) * (n_a + 2) * j)
            coupling[pos - 1, pos] = amp
            coupling[pos, pos - 1] = amp
        blocks.append(
            SectorBlock(
                k=k,
                indices=indices,
                n_c_diag=js.astype(float),
                coupling=coupling,
            )
        )
    return BlockDecomposition(space=space, blocks=tuple(blocks))


@dataclass(frozen=True)
class RotatingFrameHamiltonian:
    """H / hbar = delta * c^dag c + xi * (a^dag^2 c + a^2 c^dag), rad/s."""

    xi: float
    delta: float
    space: TwoModeSpace

    @cached_property
    def matrix(self) -> Operator:
        """Dense full-space matrix; built on demand (tests and small spaces)."""
        a = mode_operator(self.space.radial, "annihilate").matrix
        c = mode_operator(self.space.axial, "annihilate").matrix
        n_c = c.conj().T @ c
        up = np.kron(a.conj().T @ a.conj().T, c)
        m = self.delta * np.kron(np.eye(self.space.radial.dim), n_c)
        m = m + self.xi * (up + up.conj().T)
        return Operator(m, tag="hermitian")

    @property
    def blocks(self) -> BlockDecomposition:
        return block_decompose(self.space)


def build_hamiltonian(xi: float, delta: float,
                      space: TwoModeSpace) -> RotatingFrameHamiltonian:
    return RotatingFrameHamiltonian(xi=xi, delta=delta, space=space)


# ---------------------------------------------------------------------------
# detuning ramps


@dataclass(frozen=True)
class RampSchedule:
    """RC-filtered exponential detuning ramp
    delta(t) = delta_end + (delta_start - delta_end) exp(-t / tau_rc).
    """

    delta_start: float
    delta_end: float
    tau_rc: float
    duration: float
    direction: str = ""

    def __post_init__(self):
        if self.tau_rc <= 0:
            raise ValueError("tau_rc must be positive")
        if self.duration < 5 * self.tau_rc:
            raise ValueError(
                f"duration {self.duration} shorter than 5 tau_rc = "
                f"{5 * self.tau_rc}; the ramp would not settle below 1%"
            )
        if not self.direction:
            tag = "down" if self.delta_end < self.delta_start else (
                "up" if self.delta_end > self.delta_start else "flat")
            object.__setattr__(self, "direction", tag)

    def delta_at(self, t):
        return self.delta_end + (self.delta_start - self.delta_end) * np.exp(
            -np.asarray(t) / self.tau_rc
        )


def rc_ramp(delta_start: float, delta_end: float, tau_rc: float,
            duration: float | None = None) -> RampSchedule:
    if duration is None:
        duration = 5 * tau_rc
    return RampSchedule(delta_start=delta_start, delta_end=delta_end,
                        tau_rc=tau_rc, duration=duration)


def default_step(xi: float, schedule: RampSchedule) -> float:
    """Conservative step: resolves both the ramp (tau_rc / 50) and the fastest
    relevant phase evolution, taken as max(|delta endpoints|, 2 sqrt(2) xi).
    """
    omega_ref = max(abs(schedule.delta_start), abs(schedule.delta_end),
                    2 * math.sqrt(2) * abs(xi))
    bound = 2 * math.pi / (20 * omega_ref) if omega_ref > 0 else math.inf
    return min(schedule.tau_rc / 50, bound)


# ---------------------------------------------------------------------------
# propagation


class _SectorEigh:
    """Per-propagation cache of sector eigendecompositions, keyed by the
    sector K and the detuning quantized to DELTA_CACHE_RESOLUTION.

    A miss diagonalizes the exact requested detuning, so single-detuning
    runs carry no quantization bias; only genuine reuse across detunings
    within one resolution step shares a decomposition.
    """

    def __init__(self, xi: float):
        self.xi = xi
        self._cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    def get(self, block: SectorBlock, delta: float):
        key = (block.k, int(round(delta / DELTA_CACHE_RESOLUTION)))
        hit = self._cache.get(key)
        if hit is None:
            w, v = np.linalg.eigh(block.hamiltonian(self.xi, delta))
            hit = self._cache[key] = (w, v)
        return hit


def _evolve_sector(amp_sec, w, v, dt):
    return v @ (np.exp(-1j * w * dt) * (v.conj().T @ amp_sec))


def piecewise_deltas(schedule: RampSchedule, t0: float, t1: float,
                     step: float) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint detunings and durations for marching [t0, t1] in <= step."""
    span = t1 - t0
    n = max(1, int(math.ceil(span / step - 1e-12)))
    dts = np.full(n, span / n)
    mids = t0 + (np.arange(n) + 0.5) * (span / n)
    return np.asarray(schedule.delta_at(mids), dtype=float), dts


def apply_piecewise(state: StateVector, xi: float, deltas, dts,
                    cache: _SectorEigh | None = None) -> StateVector:
    """Apply the exact piecewise-constant evolution exp(-i H(delta_k) dt_k),
    in sequence, to a two-mode state. Negative dt values evolve backwards
    (conjugated Hamiltonian sequence)."""
    space = state.basis
    if not isinstance(space, TwoModeSpace):
        raise ValueError("apply_piecewise needs a two-mode state")
    cache = cache or _SectorEigh(xi)
    amp = state.amplitudes.copy()
    populated = [
        b for b in block_decompose(space).blocks
        if np.any(np.abs(amp[b.indices]) > 0.0)
    ]
    for delta, dt in zip(np.atleast_1d(deltas), np.atleast_1d(dts)):
        for b in populated:
            w, v = cache.get(b, float(delta))
            amp[b.indices] = _evolve_sector(amp[b.indices], w, v, float(dt))
    return StateVector(amp, space)


@dataclass(frozen=True)
class Trajectory:
    """Sampled evolution record; construction enforces the unitarity and
    K-conservation contracts (1e-9) at every sample."""

    times: np.ndarray
    amplitudes: np.ndarray  # (n_samples, dim)
    space: TwoModeSpace
    tracked: tuple[tuple[int, int], ...]
    populations: np.ndarray  # (n_samples, len(tracked))
    k_expect: np.ndarray
    norms: np.ndarray
    max_leak: float

    def __post_init__(self):
        if np.abs(self.norms - 1.0).max() >= 1e-9:
            raise NumericalContractError(
                f"norm drifted by {np.abs(self.norms - 1.0).max():.2e}"
            )
        if self.k_expect.size and np.ptp(self.k_expect) >= 1e-9:
            raise NumericalContractError(
                f"<K> drifted by {np.ptp(self.k_expect):.2e}"
            )

    def states(self) -> list[StateVector]:
        return [StateVector(a, self.space) for a in self.amplitudes]

    @property
    def final(self) -> StateVector:
        return StateVector(self.amplitudes[-1], self.space)

    def to_csv(self, path, comments=()) -> None:
        from .report import write_csv

        cols = ["t_s"] + [f"p_{na}_{nc}" for na, nc in self.tracked]
        cols += ["norm", "K_expect"]
        rows = np.column_stack(
            [self.times, self.populations, self.norms, self.k_expect]
        )
        write_csv(path, cols, rows, comments)


def propagate(state: StateVector, hamiltonian: RotatingFrameHamiltonian,
              t_final: float | None = None, *,
              schedule: RampSchedule | None = None,
              step: float | None = None,
              sample_times=None,
              tracked: tuple[tuple[int, int], ...] = (),
              strict_leak: bool = True) -> Trajectory:
    """Propagate a two-mode state under constant detuning or a ramp.

    Constant mode (schedule None): evolve under `hamiltonian` for t_final;
    the evolution between samples is a single exact exponential.
    Ramp mode: delta(t) follows the schedule (hamiltonian supplies xi and the
    space); piecewise-constant steps of at most `step`, which must satisfy
    step <= tau_rc / 50. t_final defaults to the schedule duration.
    """
    space = hamiltonian.space
    if state.basis != space:
        raise ValueError("state does not live in the Hamiltonian's space")
    if schedule is None:
        if t_final is None:
            raise ValueError("t_final is required for constant-detuning runs")
    else:
        if t_final is None:
            t_final = schedule.duration
        if step is None:
            step = default_step(hamiltonian.xi, schedule)
        if step > schedule.tau_rc / 50 * (1 + 1e-12):
            raise StepPolicyError(
                f"step {step} exceeds tau_rc / 50 = {schedule.tau_rc / 50}"
            )
    if sample_times is None:
        sample_times = np.linspace(0.0, t_final, 101)
    sample_times = np.asarray(sample_times, dtype=float)
    if sample_times.ndim != 1 or sample_times.size < 1 or np.any(
        np.diff(sample_times) < 0
    ) or sample_times[0] < 0 or sample_times[-1] > t_final * (1 + 1e-12):
        raise ValueError("sample_times must be ascending within [0, t_final]")

    cache = _SectorEigh(hamiltonian.xi)
    blocks = [
        b for b in block_decompose(space).blocks
        if np.any(np.abs(state.amplitudes[b.indices]) > 0.0)
    ]
    k_vec = space.k_values().astype(float)

    amp = state.amplitudes.copy()
    out = np.empty((sample_times.size, space.dim), dtype=complex)
    t_now = 0.0
    max_leak = 0.0
    for i, t_k in enumerate(sample_times):
        if t_k > t_now:
            if schedule is None:
                deltas, dts = np.array([hamiltonian.delta]), np.array([t_k - t_now])
            else:
                deltas, dts = piecewise_deltas(schedule, t_now, t_k, step)
            for delta, dt in zip(deltas, dts):
                for b in blocks:
                    w, v = cache.get(b, float(delta))
                    amp[b.indices] = _evolve_sector(amp[b.indices], w, v, dt)
            t_now = t_k
        out[i] = amp
        leak = guard_leak(amp, space)
        max_leak = max(max_leak, leak)
        if strict_leak and leak >= GUARD_LEAK_THRESHOLD:
            raise TruncationLeakError(
                f"guard-band population {leak:.2e} at t = {t_k:.3e} s; "
                "increase the truncation"
            )

    pops = np.abs(out) ** 2
    tracked = tuple(tracked)
    tracked_idx = [space.index(na, nc) for na, nc in tracked]
    return Trajectory(
        times=sample_times,
        amplitudes=out,
        space=space,
        tracked=tracked,
        populations=pops[:, tracked_idx] if tracked else np.empty(
            (sample_times.size, 0)
        ),
        k_expect=pops @ k_vec,
        norms=np.sqrt(pops.sum(axis=1)),
        max_leak=max_leak,
    )


# ---------------------------------------------------------------------------
# precomputed sweep propagator


@dataclass(frozen=True)
class SweepResult:
    """Per-sector unitaries of one detuning sweep, reusable across states.

    endpoint_bases holds the sector eigenvector matrices (columns ascending
    in eigenvalue) at the schedule's first and last instant; protocols use
    them as the normal-mode bases for state preparation and readout.

    branch_final_fid / branch_min_fid monitor the sweep's own adiabaticity:
    the instantaneous eigenstate anchored at the start (followed through the
    crossing by maximal-overlap continuity, not eigenvalue order) is evolved
    with the sweep unitary, and its fidelity to the tracked branch is
    recorded along the way. An ideal adiabatic sweep keeps it at 1.
    """

    space: TwoModeSpace
    xi: float
    schedule: RampSchedule
    step: float
    unitaries: dict[int, np.ndarray]
    endpoint_bases: dict[int, tuple[np.ndarray, np.ndarray]]
    branch_final_fid: dict[int, float]
    branch_min_fid: dict[int, float]

    def apply(self, state: StateVector) -> StateVector:
        space = state.basis
        if space != self.space:
            raise ValueError("state does not live in the sweep's space")
        amp = state.amplitudes.copy()
        for b in block_decompose(space).blocks:
            sub = amp[b.indices]
            if not np.any(np.abs(sub) > 0.0):
                continue
            u = self.unitaries.get(b.k)
            if u is None:
                raise ValueError(
                    f"state populates K = {b.k}, not covered by this sweep"
                )
            amp[b.indices] = u @ sub
        return StateVector(amp, space)

    def min_branch_fidelity(self, state: StateVector,
                            population_floor: float = 1e-6) -> float:
        """Worst along-the-sweep branch fidelity over the sectors this state
        populates above population_floor."""
        pops = state.populations()
        worst = 1.0
        for b in block_decompose(state.basis).blocks:
            if float(pops[b.indices].sum()) > population_floor:
                worst = min(worst, self.branch_min_fid.get(b.k, 1.0))
        return worst


def sweep_unitaries(space: TwoModeSpace, xi: float, schedule: RampSchedule,
                    step: float | None = None,
                    sector_ks=None) -> SweepResult:
    """Build the piecewise-exact unitary of a detuning sweep, per K sector.

    The result is state-independent: one call serves a whole grid of initial
    states (the expensive part of Wigner scans is paid once here).
    """
    if step is None:
        step = default_step(xi, schedule)
    if step > schedule.tau_rc / 50 * (1 + 1e-12):
        raise StepPolicyError(
            f"step {step} exceeds tau_rc / 50 = {schedule.tau_rc / 50}"
        )
    blocks = block_decompose(space).blocks
    if sector_ks is not None:
        wanted = set(int(k) for k in sector_ks)
        blocks = tuple(b for b in blocks if b.k in wanted)
    deltas, dts = piecewise_deltas(schedule, 0.0, schedule.duration, step)

    unitaries: dict[int, np.ndarray] = {}
    endpoint_bases: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    final_fid: dict[int, float] = {}
    min_fid: dict[int, float] = {}
    for b in blocks:
        s = b.size
        u = np.eye(s, dtype=complex)
        _, v_first = np.linalg.eigh(b.hamiltonian(xi, float(schedule.delta_at(0.0))))
        _, v_last = np.linalg.eigh(
            b.hamiltonian(xi, float(schedule.delta_at(schedule.duration)))
        )
        # adiabaticity monitor: evolve the lowest-energy instantaneous
        # eigenstate and follow its branch by continuity
        branch = v_first[:, 0].astype(complex)
        evolved = branch.copy()
        worst = 1.0
        for delta, dt in zip(deltas, dts):
            w, v = np.linalg.eigh(b.hamiltonian(xi, float(delta)))
            phases = np.exp(-1j * w * dt)
            u = (v * phases) @ (v.conj().T @ u)
            evolved = v @ (phases * (v.conj().T @ evolved))
            branch = v[:, int(np.argmax(np.abs(branch.conj() @ v)))].astype(complex)
            worst = min(worst, abs(np.vdot(branch, evolved)) ** 2)
        unitaries[b.k] = u
        endpoint_bases[b.k] = (v_first, v_last)
        final_fid[b.k] = abs(np.vdot(branch, evolved)) ** 2
        min_fid[b.k] = worst
    return SweepResult(
        space=space,
        xi=xi,
        schedule=schedule,
        step=step,
        unitaries=unitaries,
        endpoint_bases=endpoint_bases,
        branch_final_fid=final_fid,
        branch_min_fid=min_fid,
    )
