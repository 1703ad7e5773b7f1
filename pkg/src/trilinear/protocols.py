"""Experiment procedures on the two-ion phonon system.

Preparation and readout act on the normal modes: sideband and displacement
drives address the crystal's true normal-mode frequencies, so "n phonons in
the radial mode with the axial mode empty" denotes the sector eigenstate
adiabatically connected to the bare |n_a, 0> level at the working detuning
(eigenvalue rank within each K sector; this reduces to the bare product
state in the decoupled limit xi/delta -> 0, and stays well defined at high
K where the parking detuning no longer decouples the modes). Readout
likewise resolves normal-mode occupation labels. With this convention the
detuning sweep realizes the parity map exactly up to its own diabatic
error, for every sector.

Measurement model: after the adiabatic sweep the radial mode holds 0 or 1
phonon, and a red-sideband pi-pulse converts "n_r >= 1" into a bright
internal-state outcome with efficiency eta. Parity of the pre-sweep radial
state follows as <P> = 1 - 2 p1 / eta; no clamping is applied, so finite-shot
estimates may leave [-1, 1] (the estimator stays unbiased). The same
"n_r >= 1" Bernoulli channel is reused for non-swept diagnostics with higher
occupation, a documented simplification.

Randomness: every sampled quantity draws from a PCG64 generator seeded with
(seed, *stream indices), so grid points are independent work items whose
results do not depend on evaluation order or concurrency.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .dynamics import (
    RampSchedule,
    SweepResult,
    _SectorEigh,
    block_decompose,
    rc_ramp,
    sweep_unitaries,
)
from .fock import (
    FockDim,
    StateVector,
    TwoModeSpace,
    _displacement_matrix,
    fock_state,
    guard_leak,
    GUARD_LEAK_THRESHOLD,
)
from .trap import ModeParams

PARKING_DETUNING = 2 * math.pi * 35e3  # rad/s, mode-decoupling point
TAU_SLOW = 2e-3  # s, adiabatic RC constant
TAU_FAST = 20e-6  # s, diabatic RC constant
DISPLACEMENT_RATE = math.sqrt(3.0e-4)  # |alpha| per microsecond of drive

ADIABATIC_FIDELITY_FLOOR = 0.99

# amplitudes at or below this are treated as unpopulated when choosing
# which K sectors a protocol needs (coherent-state tails reach every level
# with ~1e-50 weight; dropping them perturbs the norm below 1e-24)
AMPLITUDE_FLOOR = 1e-12


@dataclass(frozen=True)
class MeasurementModel:
    """Phonon-to-qubit mapping efficiency plus shot sampling parameters.

    dark_bright_prob models false bright counts with no phonon present; it
    stays 0 by default because the reference calibration folds every
    imperfection into eta.
    """

    eta: float = 0.86
    shots: int = 500
    seed: int = 0
    dark_bright_prob: float = 0.0

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if self.shots < 1:
            raise ValueError("shots must be a positive integer")
        if not 0 <= self.dark_bright_prob < 1:
            raise ValueError("dark_bright_prob must lie in [0, 1)")

    def rng(self, *stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, *stream])


def binomial_stderr(p: float, shots: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / shots)


def measurement_channel(p_phonon: float, model: MeasurementModel,
                        stream: tuple[int, ...] = ()) -> tuple[float, float, float]:
    """Bright-state probability through the eta-limited mapping.

    Returns (p1_exact, p1_sampled, stderr): p1_exact = eta * p_phonon plus
    the dark-count term, p1_sampled a Binomial(shots, p1_exact)/shots draw
    from the seeded generator, stderr the binomial error at the sampled
    estimate.
    """
    if not 0.0 <= p_phonon <= 1.0 + 1e-12:
        raise ValueError(f"p_phonon = {p_phonon} outside [0, 1]")
    p_phonon = min(p_phonon, 1.0)
    p1 = model.eta * p_phonon + model.dark_bright_prob * (1.0 - p_phonon)
    k = model.rng(*stream).binomial(model.shots, p1)
    p1_hat = k / model.shots
    return p1, p1_hat, binomial_stderr(p1_hat, model.shots)


def parity_estimate(p1: float, eta: float) -> float:
    """<P> = 1 - 2 p1 / eta, unclamped."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return 1.0 - 2.0 * p1 / eta


@dataclass(frozen=True)
class ParityResult:
    p1: float
    parity: float
    shots: int
    stderr: float
    eta: float

    def __post_init__(self):
        if abs(self.parity - parity_estimate(self.p1, self.eta)) > 1e-12:
            raise ValueError("parity inconsistent with 1 - 2 p1 / eta")


def decoherence_envelope(t: float, tau_c: float) -> float:
    """Phenomenological contrast factor exp(-t / tau_c)."""
    if tau_c <= 0 or t < 0:
        raise ValueError("need t >= 0 and tau_c > 0")
    return math.exp(-t / tau_c)


def displacement_calibration(duration_us: float) -> float:
    """|alpha| produced by a coherent drive of the given duration, from the
    measured calibration |alpha|^2 = 3.0e-4 * t^2 (t in microseconds)."""
    if duration_us < 0:
        raise ValueError("drive duration must be >= 0")
    return DISPLACEMENT_RATE * duration_us


def default_space(radial_dim: int = 40, axial_dim: int = 20) -> TwoModeSpace:
    return TwoModeSpace(FockDim(radial_dim), FockDim(axial_dim))


# ---------------------------------------------------------------------------
# normal-mode (adiabatic-label) basis at a working detuning


def _label_basis(vecs: np.ndarray, delta: float) -> np.ndarray:
    """Columns indexed by the local bare label (ascending n_c); column j is
    the eigenvector adiabatically connected to that label at the given
    detuning: eigenvalue rank j for delta > 0, reversed order for delta < 0
    (bare sector energies are delta * n_c). Phases are fixed by making each
    column's largest component real positive."""
    if delta == 0:
        raise ValueError("normal-mode labels are undefined at delta = 0")
    v = vecs if delta > 0 else vecs[:, ::-1]
    lead = v[np.argmax(np.abs(v), axis=0), np.arange(v.shape[1])]
    return v * (np.abs(lead) / lead)


def normal_mode_embedding(state_r: StateVector, space: TwoModeSpace,
                          sweep: SweepResult) -> StateVector:
    """Radial normal-mode state (axial normal mode empty) as a two-mode
    state at the sweep's starting detuning."""
    if not isinstance(state_r.basis, FockDim) or state_r.basis != space.radial:
        raise ValueError("state must live on the radial mode of the space")
    delta0 = float(sweep.schedule.delta_at(0.0))
    amp = np.zeros(space.dim, dtype=complex)
    blocks = block_decompose(space)
    for k in np.nonzero(np.abs(state_r.amplitudes) > AMPLITUDE_FLOOR)[0]:
        bases = sweep.endpoint_bases.get(int(k))
        if bases is None:
            raise ValueError(f"sweep does not cover the populated K = {k}")
        b = blocks.by_k(int(k))
        amp[b.indices] += state_r.amplitudes[k] * _label_basis(bases[0], delta0)[:, 0]
    return StateVector(amp, space)


def normal_mode_populations(state: StateVector, sweep: SweepResult) -> np.ndarray:
    """Populations of the normal-mode occupation labels at the sweep's final
    detuning, as a full-space array indexed like the bare basis."""
    space = state.basis
    if not isinstance(space, TwoModeSpace):
        raise ValueError("normal_mode_populations needs a two-mode state")
    delta1 = float(sweep.schedule.delta_at(sweep.schedule.duration))
    pops = np.zeros(space.dim)
    for b in block_decompose(space).blocks:
        sub = state.amplitudes[b.indices]
        if not np.any(np.abs(sub) > AMPLITUDE_FLOOR):
            continue
        bases = sweep.endpoint_bases.get(b.k)
        if bases is None:
            raise ValueError(f"sweep does not cover the populated K = {b.k}")
        basis = _label_basis(bases[1], delta1)
        pops[b.indices] = np.abs(basis.conj().T @ sub) ** 2
    return pops


def _label_marginals(pops: np.ndarray,
                     space: TwoModeSpace) -> tuple[np.ndarray, np.ndarray]:
    grid = pops.reshape(space.radial.dim, space.axial.dim)
    return grid.sum(axis=1), grid.sum(axis=0)


# ---------------------------------------------------------------------------
# conversion oscillation


@dataclass(frozen=True)
class OscillationResult:
    hold_times: np.ndarray
    p_radial: np.ndarray
    p_axial: np.ndarray
    p_radial_sampled: np.ndarray
    p_axial_sampled: np.ndarray
    fit_frequency: float  # rad/s
    fit_frequency_err: float  # rad/s, 1 sigma from the fit covariance
    fit_ok: bool
    envelope_tau: float | None

    def to_csv(self, path, comments=()) -> None:
        from .report import write_csv

        rows = np.column_stack([
            self.hold_times * 1e3,
            self.p_radial,
            self.p_axial,
            self.p_radial_sampled,
            self.p_axial_sampled,
        ])
        write_csv(
            path,
            ["t_ms", "p_radial", "p_axial", "p_radial_sampled", "p_axial_sampled"],
            rows,
            comments,
        )


def _fit_tone(t, y, decay: bool):
    """Least-squares cosine fit; returns (omega, omega_err, ok)."""
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    yc = y - y.mean()
    dt = np.mean(np.diff(t))
    spec = np.abs(np.fft.rfft(yc))
    freqs = np.fft.rfftfreq(t.size, d=dt)
    f0 = float(freqs[np.argmax(spec[1:]) + 1]) if spec.size > 1 else 1.0 / t[-1]
    a0 = float(y.max() - y.min()) / 2
    c0 = float(y.mean())

    if decay:
        def model(tt, c, a, f, phi, tau):
            return c + a * np.exp(-tt / tau) * np.cos(2 * np.pi * f * tt + phi)
        extra = [t[-1]]
        bounds = ([-np.inf, 0, 0, -2 * np.pi, 1e-6],
                  [np.inf, np.inf, np.inf, 2 * np.pi, np.inf])
    else:
        def model(tt, c, a, f, phi):
            return c + a * np.cos(2 * np.pi * f * tt + phi)
        extra = []
        bounds = ([-np.inf, 0, 0, -2 * np.pi], [np.inf, np.inf, np.inf, 2 * np.pi])

    best = None
    for phi0 in (0.0, np.pi / 2, np.pi, 3 * np.pi / 2):
        try:
            popt, pcov = curve_fit(
                model, t, y, p0=[c0, a0, f0, phi0, *extra], bounds=bounds,
                maxfev=20000,
            )
        except (RuntimeError, ValueError):
            continue
        resid = float(np.sum((model(t, *popt) - y) ** 2))
        if best is None or resid < best[0]:
            best = (resid, popt, pcov)
    if best is None:
        return math.nan, math.nan, False
    _, popt, pcov = best
    f_err = math.sqrt(abs(pcov[2, 2])) if np.isfinite(pcov[2, 2]) else math.nan
    return 2 * math.pi * popt[2], 2 * math.pi * f_err, True


def oscillation_experiment(n_initial: int, hold_times, params: ModeParams,
                           model: MeasurementModel,
                           envelope_tau: float | None = None,
                           space: TwoModeSpace | None = None,
                           parking: float = PARKING_DETUNING,
                           tau_fast: float = TAU_FAST,
                           step: float | None = None) -> OscillationResult:
    """Two-phonon conversion sequence: start at the parking detuning with
    |n_initial> in the radial mode, ramp fast to resonance, hold, ramp back,
    read out both modes.

    The hold sits at delta = 0 exactly (the completed-ramp idealization; the
    RC residual after 5 tau is below 1%). The optional decoherence envelope
    multiplies each excitation probability about the midpoint of its ideal
    swing before the measurement channel is applied.
    """
    if n_initial not in (1, 2):
        raise ValueError("the conversion experiment starts with 1 or 2 phonons")
    space = space or default_space()
    hold_times = np.asarray(hold_times, float)

    down = rc_ramp(parking, 0.0, tau_fast)
    up = rc_ramp(0.0, parking, tau_fast)
    populated = [int(n_initial)]
    u_down = sweep_unitaries(space, params.xi, down, step, sector_ks=populated)
    u_up = sweep_unitaries(space, params.xi, up, step, sector_ks=populated)

    psi0 = normal_mode_embedding(fock_state(space.radial, n_initial), space, u_down)
    cache = _SectorEigh(params.xi)
    blocks = [block_decompose(space).by_k(k) for k in populated]
    after_down = u_down.apply(psi0)

    p_rad = np.empty(hold_times.size)
    p_ax = np.empty(hold_times.size)
    for i, tau in enumerate(hold_times):
        amp = after_down.amplitudes.copy()
        for b in blocks:
            w, v = cache.get(b, 0.0)
            amp[b.indices] = v @ (np.exp(-1j * w * tau) * (v.conj().T @ amp[b.indices]))
        final = u_up.apply(StateVector(amp, space))
        label_pops = normal_mode_populations(final, u_up)
        radial_labels, axial_labels = _label_marginals(label_pops, space)
        p_rad[i] = 1.0 - radial_labels[0]
        p_ax[i] = 1.0 - axial_labels[0]

    if envelope_tau is not None:
        env = np.exp(-hold_times / envelope_tau)
        for trace in (p_rad, p_ax):
            center = 0.5 * (trace.max() + trace.min())
            trace[:] = center + (trace - center) * env

    p_rad_s = np.empty_like(p_rad)
    p_ax_s = np.empty_like(p_ax)
    for i in range(hold_times.size):
        _, p_rad_s[i], _ = measurement_channel(p_rad[i], model, stream=(i, 0))
        _, p_ax_s[i], _ = measurement_channel(p_ax[i], model, stream=(i, 1))

    omega, omega_err, ok = _fit_tone(hold_times, p_ax, decay=envelope_tau is not None)
    return OscillationResult(
        hold_times=hold_times,
        p_radial=p_rad,
        p_axial=p_ax,
        p_radial_sampled=p_rad_s,
        p_axial_sampled=p_ax_s,
        fit_frequency=omega,
        fit_frequency_err=omega_err,
        fit_ok=ok,
        envelope_tau=envelope_tau,
    )


# ---------------------------------------------------------------------------
# avoided crossing


@dataclass(frozen=True)
class SpectrumBranch:
    """Eigenvalue branches of the two-phonon (K = 2) sector vs detuning."""

    deltas: np.ndarray  # rad/s
    branches: np.ndarray  # (n, 2) rad/s, ascending per row
    min_gap: float  # rad/s
    min_gap_delta: float  # rad/s


def avoided_crossing_spectrum(deltas, xi: float) -> SpectrumBranch:
    """K = 2 eigenvalues over a detuning range spanning zero. The sector is
    exactly two-dimensional ({|2,0>, |0,1>}), so truncation plays no role."""
    deltas = np.asarray(deltas, float)
    if deltas.min() > 0 or deltas.max() < 0:
        raise ValueError("the detuning range must span 0")
    block = block_decompose(
        TwoModeSpace(FockDim(4, guard_band=0), FockDim(2, guard_band=0))
    ).by_k(2)
    branches = np.empty((deltas.size, 2))
    for i, d in enumerate(deltas):
        branches[i] = np.linalg.eigvalsh(block.hamiltonian(xi, float(d)))
    gaps = branches[:, 1] - branches[:, 0]
    i_min = int(np.argmin(gaps))
    return SpectrumBranch(
        deltas=deltas,
        branches=branches,
        min_gap=float(gaps[i_min]),
        min_gap_delta=float(deltas[i_min]),
    )


def spectrum_to_csv(spec: SpectrumBranch, path, comments=()) -> None:
    from .report import write_csv

    two_pi = 2 * math.pi
    rows = np.column_stack([
        spec.deltas / two_pi,
        spec.branches[:, 0] / two_pi,
        spec.branches[:, 1] / two_pi,
    ])
    write_csv(path, ["delta_hz", "branch0_hz", "branch1_hz"], rows, comments)


# ---------------------------------------------------------------------------
# adiabatic parity measurement


@dataclass(frozen=True)
class AdiabaticParityResult:
    exact: ParityResult
    sampled: ParityResult
    p_phonon: float
    axial_distribution: np.ndarray
    min_branch_fidelity: float
    flags: tuple[str, ...]


def slow_sweep(parking: float = PARKING_DETUNING,
               tau_rc: float = TAU_SLOW) -> RampSchedule:
    """The parity-measurement ramp: +parking -> -parking, adiabatic RC."""
    return rc_ramp(parking, -parking, tau_rc)


def adiabatic_parity(state_r: StateVector, xi: float, space: TwoModeSpace,
                     schedule: RampSchedule, model: MeasurementModel,
                     step: float | None = None,
                     sweep: SweepResult | None = None,
                     stream: tuple[int, ...] = ()) -> AdiabaticParityResult:
    """Sweep the detuning through the crossing and read the radial mode.

    Even initial Fock components end with the radial mode empty, odd ones
    with a single radial phonon, so P(n_r >= 1) through the mapping channel
    estimates the parity. The final axial distribution (which carries n/2)
    is returned as an extra diagnostic. A per-sector instantaneous-eigenstate
    fidelity below 0.99 raises the 'diabatic' flag; it is reported, not fatal.
    """
    if sweep is None:
        populated = sorted(
            int(k) for k in np.nonzero(np.abs(state_r.amplitudes) > AMPLITUDE_FLOOR)[0]
        )
        sweep = sweep_unitaries(space, xi, schedule, step, sector_ks=populated)
    psi0 = normal_mode_embedding(state_r, space, sweep)
    final = sweep.apply(psi0)

    flags = []
    if guard_leak(final.amplitudes, space) >= GUARD_LEAK_THRESHOLD:
        flags.append("leak")
    min_fid = sweep.min_branch_fidelity(psi0)
    if min_fid < ADIABATIC_FIDELITY_FLOOR:
        flags.append("diabatic")

    label_pops = normal_mode_populations(final, sweep)
    radial_labels, axial_labels = _label_marginals(label_pops, space)
    p_phonon = float(1.0 - radial_labels[0])
    p_phonon = min(max(p_phonon, 0.0), 1.0)
    p1, p1_hat, stderr = measurement_channel(p_phonon, model, stream=stream)
    exact = ParityResult(
        p1=p1, parity=parity_estimate(p1, model.eta), shots=0, stderr=0.0,
        eta=model.eta,
    )
    sampled = ParityResult(
        p1=p1_hat, parity=parity_estimate(p1_hat, model.eta),
        shots=model.shots, stderr=2 * stderr / model.eta, eta=model.eta,
    )
    return AdiabaticParityResult(
        exact=exact,
        sampled=sampled,
        p_phonon=p_phonon,
        axial_distribution=axial_labels,
        min_branch_fidelity=min_fid,
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# Wigner tomography


@dataclass(frozen=True)
class WignerScan:
    """Per-point displaced-parity estimates of the Wigner function."""

    alphas: np.ndarray
    p1_exact: np.ndarray
    p1_sampled: np.ndarray
    parity: np.ndarray
    wigner: np.ndarray
    stderr: np.ndarray
    flags: tuple[str, ...]
    meta: dict = field(compare=False)

    def __post_init__(self):
        eta = self.meta.get("eta", 1.0)
        bound = (2 / math.pi) * (1 + 2 * (1 - eta) / eta) + 1e-9
        if np.abs(self.wigner).max() > bound:
            raise ValueError(
                f"Wigner estimate exceeds the eta-corrected bound {bound:.4f}"
            )

    def to_csv(self, path, comments=()) -> None:
        from .report import write_csv

        rows = [
            (
                a.real, a.imag, p1e, p1s, par, w, se, fl,
            )
            for a, p1e, p1s, par, w, se, fl in zip(
                self.alphas, self.p1_exact, self.p1_sampled, self.parity,
                self.wigner, self.stderr, self.flags,
            )
        ]
        write_csv(
            path,
            ["re_alpha", "im_alpha", "p1_exact", "p1_sampled", "parity",
             "wigner", "stderr", "flags"],
            rows,
            comments,
        )


def phase_space_grid(extent: float = 3.0, points: int = 41) -> np.ndarray:
    """Flat row-major square grid re + i*im, re outer, im inner."""
    axis = np.linspace(-extent, extent, points)
    re, im = np.meshgrid(axis, axis, indexing="ij")
    return (re + 1j * im).ravel()


def wigner_scan(state_r: StateVector, alphas, xi: float, space: TwoModeSpace,
                schedule: RampSchedule, model: MeasurementModel,
                exact: bool = False, step: float | None = None,
                sweep: SweepResult | None = None, workers: int = 1,
                meta: dict | None = None) -> WignerScan:
    """Displace, sweep, map, estimate: W(alpha) = (2/pi) <P>.

    The sweep unitary is computed once and shared across grid points (and
    across scans when passed in). Per-point randomness is drawn from the
    stream (seed, point index), so the scan is deterministic and independent
    of worker count.
    """
    alphas = np.asarray(alphas, complex).ravel()
    dim_r = state_r.basis
    if not isinstance(dim_r, FockDim) or dim_r != space.radial:
        raise ValueError("state must live on the radial mode of the space")
    if sweep is None:
        sweep = sweep_unitaries(space, xi, schedule, step,
                                sector_ks=range(space.radial.dim))

    n = alphas.size
    p1_exact = np.empty(n)
    p1_sampled = np.empty(n)
    stderr = np.empty(n)
    flags: list[str] = [""] * n

    def point(i: int) -> None:
        disp = _displacement_matrix(-alphas[i], dim_r) @ state_r.amplitudes
        point_flags = []
        if guard_leak(disp, dim_r) >= GUARD_LEAK_THRESHOLD:
            point_flags.append("leak")
        res = adiabatic_parity(
            StateVector(disp, dim_r), xi, space, schedule, model,
            sweep=sweep, stream=(i,),
        )
        p1_exact[i] = res.exact.p1
        p1_sampled[i] = res.sampled.p1
        stderr[i] = res.sampled.stderr
        point_flags.extend(f for f in res.flags if f not in point_flags)
        flags[i] = ";".join(point_flags)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(point, range(n)))
    else:
        for i in range(n):
            point(i)

    p1 = p1_exact if exact else p1_sampled
    parity = 1.0 - 2.0 * p1 / model.eta
    if exact:
        stderr = np.zeros(n)
        p1_sampled = p1_exact.copy()
    scan_meta = {
        "eta": model.eta,
        "shots": 0 if exact else model.shots,
        "seed": model.seed,
        "exact": exact,
        "radial_dim": space.radial.dim,
        "axial_dim": space.axial.dim,
        "tau_rc_s": schedule.tau_rc,
    }
    scan_meta.update(meta or {})
    return WignerScan(
        alphas=alphas,
        p1_exact=p1_exact,
        p1_sampled=p1_sampled,
        parity=parity,
        wigner=2.0 / math.pi * parity,
        stderr=2.0 / math.pi * 2.0 * stderr / model.eta,
        flags=tuple(flags),
        meta=scan_meta,
    )


def radial_cut(state_r: StateVector, radii, xi: float, space: TwoModeSpace,
               schedule: RampSchedule, model: MeasurementModel,
               n_phases: int = 8, step: float | None = None,
               sweep: SweepResult | None = None,
               workers: int = 1) -> np.ndarray:
    """Phase-averaged exact W(|alpha|) on the given radii (n_phases points
    per circle; states with rotation-symmetric W make this a consistency
    average rather than new information)."""
    radii = np.asarray(radii, float)
    phases = np.exp(2j * np.pi * np.arange(n_phases) / n_phases)
    alphas = (radii[:, None] * phases[None, :]).ravel()
    scan = wigner_scan(state_r, alphas, xi, space, schedule, model,
                       exact=True, step=step, sweep=sweep, workers=workers)
    return scan.wigner.reshape(radii.size, n_phases).mean(axis=1)
