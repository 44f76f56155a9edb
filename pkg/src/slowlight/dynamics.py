"""Coupled field-atom dynamics in one spatial dimension.

Integrates the forward/backward slowly varying field envelopes together
with per-cell, per-spectral-class atomic amplitudes (two optical
coherences and one spin coherence).  The scheme locks the time step to the
grid, c*dt = dz, advects both fields by exactly one cell per step (no
numerical dispersion) and advances the local field-atom system in each
cell with a classical 4th-order Runge-Kutta update.

Amplitude normalization: the single coupling constant used in both the
polarization drive and the field source is sqrt(g2n), the square root of
the collective coupling strength.  With this choice the resonant intensity
attenuation is exp(-optical_depth), the group velocity is
c/(1 + g2n/omega_c^2) and the excitation functional below is conserved in
the lossless limit.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .medium import MediumParams, SpectralClass, class_arrays

_FINITE_CHECK_EVERY = 64  # steps between NaN/Inf sweeps of the state


class CFLViolation(ValueError):
    """Raised when a step does not satisfy c*dt == dz."""


class NumericalAbort(RuntimeError):
    """Raised when the state stops being finite; carries time and cell."""


@dataclass(frozen=True)
class Grid:
    """Uniform z grid of `cells` cells covering [0, length]."""

    cells: int
    length: float = 1.0

    def __post_init__(self) -> None:
        if self.cells < 1:
            raise ValueError(f"cells must be >= 1, got {self.cells}")
        if not (self.length > 0.0):
            raise ValueError(f"length must be > 0, got {self.length}")

    @property
    def dz(self) -> float:
        return self.length / self.cells

    @property
    def z(self) -> np.ndarray:
        """Cell-center coordinates."""
        return (np.arange(self.cells) + 0.5) * self.dz


@dataclass
class ControlDrive:
    """Spatially uniform control drives.

    omega_c / omega_a map a time in us to a complex Rabi frequency in
    rad/us.  detuning_c / detuning_a are the optical detunings of the two
    Raman channels (zero for resonant pairs).
    """

    omega_c: Callable[[float], complex]
    omega_a: Callable[[float], complex]
    detuning_c: float = 0.0
    detuning_a: float = 0.0

    @classmethod
    def constant(cls, omega_c: complex, omega_a: complex = 0.0,
                 detuning_c: float = 0.0, detuning_a: float = 0.0) -> "ControlDrive":
        return cls(lambda t: omega_c, lambda t: omega_a, detuning_c, detuning_a)

    def sample(self, t: float) -> tuple[complex, complex]:
        return complex(self.omega_c(t)), complex(self.omega_a(t))


@dataclass
class SimState:
    """Fields on the z grid plus atomic amplitudes per cell and class."""

    t: float
    e_plus: np.ndarray   # (M,) complex
    e_minus: np.ndarray  # (M,) complex
    p_plus: np.ndarray   # (M, K) complex
    p_minus: np.ndarray  # (M, K) complex
    s: np.ndarray        # (M, K) complex
    grid: Grid
    deltas: np.ndarray   # (K,) spin detunings
    weights: np.ndarray  # (K,) quadrature weights
    delta_opt: np.ndarray  # (K,) optical detuning offsets

    @classmethod
    def zeros(cls, grid: Grid, classes: Sequence[SpectralClass]) -> "SimState":
        deltas, weights, delta_opt = class_arrays(classes)
        m, k = grid.cells, len(deltas)
        return cls(
            t=0.0,
            e_plus=np.zeros(m, dtype=complex),
            e_minus=np.zeros(m, dtype=complex),
            p_plus=np.zeros((m, k), dtype=complex),
            p_minus=np.zeros((m, k), dtype=complex),
            s=np.zeros((m, k), dtype=complex),
            grid=grid,
            deltas=deltas,
            weights=weights,
            delta_opt=delta_opt,
        )

    def copy(self) -> "SimState":
        return SimState(self.t, self.e_plus.copy(), self.e_minus.copy(),
                        self.p_plus.copy(), self.p_minus.copy(), self.s.copy(),
                        self.grid, self.deltas, self.weights, self.delta_opt)

    def validate(self) -> None:
        m, k = self.grid.cells, len(self.deltas)
        if self.e_plus.shape != (m,) or self.e_minus.shape != (m,):
            raise ValueError("field arrays must have shape (cells,)")
        for name in ("p_plus", "p_minus", "s"):
            if getattr(self, name).shape != (m, k):
                raise ValueError(f"{name} must have shape (cells, n_classes)")
        _assert_finite_arrays(self.t, e_plus=self.e_plus, e_minus=self.e_minus,
                              p_plus=self.p_plus, p_minus=self.p_minus, s=self.s)

    @property
    def weak_probe_ok(self) -> bool:
        """True while the linearized (weak-probe) model is self-consistent."""
        return bool(max(np.abs(self.p_plus).max(initial=0.0),
                        np.abs(self.p_minus).max(initial=0.0),
                        np.abs(self.s).max(initial=0.0)) <= 1.0)

    def spin_norm(self) -> float:
        """sum_z dz sum_j w_j |S|^2, the stored spin-coherence norm."""
        return float((np.abs(self.s) ** 2 @ self.weights).sum() * self.grid.dz)


@dataclass
class DetectorTrace:
    """Time series at the medium exits plus the spin-coherence norm."""

    t: np.ndarray
    fwd_intensity: np.ndarray   # |E+(L, t)|^2
    bwd_intensity: np.ndarray   # |E-(0, t)|^2
    spin_norm: np.ndarray       # sum_z dz sum_j w_j |S|^2
    annotations: tuple = ()     # pulse events, filled in by experiment
    readouts: tuple = ()        # (t, diffracted_signal) pairs


def _assert_finite_arrays(t: float, **arrays) -> None:
    for name, arr in arrays.items():
        finite = np.isfinite(arr)
        if not finite.all():
            cell = int(np.argwhere(~finite)[0][0])
            raise NumericalAbort(
                f"non-finite value in {name} at t={t:.6g} us, cell {cell}")


def model_rhs(state: SimState, drive: ControlDrive, m: MediumParams,
              j: int, cell: int = 0) -> tuple[complex, complex, complex]:
    """Time derivatives of (P+, P-, S) for class j at one cell.

    dP+/dt = -(gamma_opt/2 + i D+) P+ + (i/2)(g E+ + Omega_C S)
    dP-/dt = -(gamma_opt/2 + i D-) P- + (i/2)(g E- + Omega_A S)
    dS/dt  = -(gamma_spin/2 + i delta_j) S + (i/2)(Omega_C* P+ + Omega_A* P-)

    with g = sqrt(g2n).  Reference implementation used by tests; the run
    loop evaluates the same expressions vectorized over cells and classes.
    """
    omega_c, omega_a = drive.sample(state.t)
    g = math.sqrt(m.g2n)
    dj = state.deltas[j]
    dopt = state.delta_opt[j]
    pp = state.p_plus[cell, j]
    pm = state.p_minus[cell, j]
    s = state.s[cell, j]
    ep = state.e_plus[cell]
    em = state.e_minus[cell]
    d_pp = -(0.5 * m.gamma_opt + 1j * (drive.detuning_c + dopt)) * pp \
        + 0.5j * (g * ep + omega_c * s)
    d_pm = -(0.5 * m.gamma_opt + 1j * (drive.detuning_a + dopt)) * pm \
        + 0.5j * (g * em + omega_a * s)
    d_s = -(0.5 * m.gamma_spin + 1j * dj) * s \
        + 0.5j * (omega_c.conjugate() * pp + omega_a.conjugate() * pm)
    return d_pp, d_pm, d_s


class _Propagator:
    """Packed state and preallocated buffers for the advance loop.

    Layout: fields f = (2, M) rows [E+, E-]; atoms a = (3, K, M) blocks
    [P+, P-, S] (class-major so the E drive broadcasts along the
    contiguous axis).  All Runge-Kutta arithmetic runs in place on buffers
    allocated once, and the Rabi couplings between the three atomic blocks
    apply as a single 3x3 matrix product, which keeps the per-step cost
    close to the memory-bandwidth floor.
    """

    def __init__(self, m: MediumParams, state: SimState,
                 detuning_c: float = 0.0, detuning_a: float = 0.0):
        self.m = m
        self.grid = state.grid
        self.g = math.sqrt(m.g2n)
        self.half_g = 0.5j * self.g
        self.dt = state.grid.dz / m.c
        cells = state.grid.cells
        k = len(state.deltas)
        self.w = state.weights.astype(complex)
        self.w_real = state.weights
        self.dec = np.empty((3, k, 1), dtype=complex)
        self.dec[0, :, 0] = -(0.5 * m.gamma_opt + 1j * (detuning_c + state.delta_opt))
        self.dec[1, :, 0] = -(0.5 * m.gamma_opt + 1j * (detuning_a + state.delta_opt))
        self.dec[2, :, 0] = -(0.5 * m.gamma_spin + 1j * state.deltas)
        self.t = state.t
        self.f = np.empty((2, cells), dtype=complex)
        self.a = np.empty((3, k, cells), dtype=complex)
        self.f[0] = state.e_plus
        self.f[1] = state.e_minus
        self.a[0] = state.p_plus.T
        self.a[1] = state.p_minus.T
        self.a[2] = state.s.T
        # RK4 work areas
        shape_f, shape_a = (2, cells), (3, k, cells)
        self._kf = [np.empty(shape_f, complex) for _ in range(4)]
        self._ka = [np.empty(shape_a, complex) for _ in range(4)]
        self._yf = np.empty(shape_f, complex)
        self._ya = np.empty(shape_a, complex)
        self._cross = np.empty(shape_a, complex)
        self._tmp_e = np.empty(cells, dtype=complex)

    def sync_to_state(self, state: SimState) -> None:
        state.t = self.t
        state.e_plus = self.f[0].copy()
        state.e_minus = self.f[1].copy()
        state.p_plus = self.a[0].T.copy()
        state.p_minus = self.a[1].T.copy()
        state.s = self.a[2].T.copy()

    def load_spin(self, s: np.ndarray) -> None:
        """Overwrite the packed spin block from an (M, K) array."""
        self.a[2] = s.T

    def _rhs(self, f, a, oc, oa, kf, ka) -> None:
        """kf, ka <- time derivatives of (fields, atoms) at drive (oc, oa)."""
        np.matmul(self.w, a[0], out=kf[0])
        np.matmul(self.w, a[1], out=kf[1])
        kf *= self.half_g
        # decay and detuning, then the three Rabi cross couplings in one
        # 3x3 product over the flattened class/cell axis
        np.multiply(a, self.dec, out=ka)
        nk = a.shape[1] * a.shape[2]
        cross = np.array([[0.0, 0.0, 0.5j * oc],
                          [0.0, 0.0, 0.5j * oa],
                          [0.5j * np.conj(oc), 0.5j * np.conj(oa), 0.0]],
                         dtype=complex)
        flat = self._cross.reshape(3, nk)
        np.matmul(cross, a.reshape(3, nk), out=flat)
        ka += self._cross
        # field drive of the optical coherences
        np.multiply(f[0], self.half_g, out=self._tmp_e)
        ka[0] += self._tmp_e
        np.multiply(f[1], self.half_g, out=self._tmp_e)
        ka[1] += self._tmp_e

    def _stage(self, coeff, kf, ka) -> None:
        """(_yf, _ya) <- y + coeff * k, in place."""
        np.multiply(kf, coeff, out=self._yf)
        self._yf += self.f
        np.multiply(ka, coeff, out=self._ya)
        self._ya += self.a

    def local_update(self, oc0, oa0, oc1, oa1, oc2, oa2) -> None:
        """Classical RK4 on the per-cell field-atom system over one dt.

        Drive values are supplied at the step start (0), midpoint (1) and
        end (2).  Advection happens outside this update, so within the
        step the fields behave as local variables coupled to their cell's
        atoms.
        """
        dt = self.dt
        kf, ka = self._kf, self._ka
        self._rhs(self.f, self.a, oc0, oa0, kf[0], ka[0])
        self._stage(0.5 * dt, kf[0], ka[0])
        self._rhs(self._yf, self._ya, oc1, oa1, kf[1], ka[1])
        self._stage(0.5 * dt, kf[1], ka[1])
        self._rhs(self._yf, self._ya, oc1, oa1, kf[2], ka[2])
        self._stage(dt, kf[2], ka[2])
        self._rhs(self._yf, self._ya, oc2, oa2, kf[3], ka[3])
        # y += dt/6 * (k1 + 2 (k2 + k3) + k4)
        for y, k in ((self.f, kf), (self.a, ka)):
            acc = k[1]
            acc += k[2]
            acc *= 2.0
            acc += k[0]
            acc += k[3]
            acc *= dt / 6.0
            y += acc

    def advect(self, inject_plus: complex, inject_minus: complex,
               boundary: str) -> None:
        ep, em = self.f[0], self.f[1]
        if boundary == "periodic":
            self.f[0] = np.roll(ep, 1)
            self.f[1] = np.roll(em, -1)
        else:
            ep[1:] = ep[:-1]
            ep[0] = inject_plus
            em[:-1] = em[1:]
            em[-1] = inject_minus

    def spin_norm(self) -> float:
        return float((self.w_real @ (np.abs(self.a[2]) ** 2)).sum()
                     * self.grid.dz)

    def check_finite(self) -> None:
        _assert_finite_arrays(self.t, fields=self.f, atoms=self.a)


def step(state: SimState, drive: ControlDrive, m: MediumParams, dt: float, *,
         inject_plus: complex = 0.0j, inject_minus: complex = 0.0j,
         boundary: str = "open") -> SimState:
    """Advance the state by one step of exactly dt = dz/c.

    The fields advect by one cell (exact upwind transport), then every
    cell runs a 4th-order local update of its atomic amplitudes together
    with the source deposition into the local fields.  Mutates and returns
    `state`.  Raises CFLViolation unless c*dt == dz to within 1e-9
    relative, and NumericalAbort if the state stops being finite.
    """
    _require_cfl(m, state.grid, dt)
    prop = _Propagator(m, state, drive.detuning_c, drive.detuning_a)
    t = state.t
    prop.advect(inject_plus, inject_minus, boundary)
    oc0, oa0 = drive.sample(t)
    oc1, oa1 = drive.sample(t + 0.5 * dt)
    oc2, oa2 = drive.sample(t + dt)
    prop.local_update(oc0, oa0, oc1, oa1, oc2, oa2)
    prop.t = t + dt
    prop.check_finite()
    prop.sync_to_state(state)
    return state


def _require_cfl(m: MediumParams, grid: Grid, dt: float) -> None:
    dz = grid.dz
    if dt <= 0.0:
        raise CFLViolation(f"dt must be > 0, got {dt}")
    if m.c * dt > dz * (1.0 + 1e-9):
        raise CFLViolation(f"CFL violated: c*dt = {m.c * dt:.6g} > dz = {dz:.6g}")
    if abs(m.c * dt - dz) > 1e-9 * dz:
        raise CFLViolation(
            f"exact one-cell advection requires c*dt == dz; got c*dt = "
            f"{m.c * dt:.6g}, dz = {dz:.6g}")


def run_dynamics(sequence, m: MediumParams, grid: Grid,
                 classes: Sequence[SpectralClass], *,
                 snapshot_every_us: float | None = None,
                 initial_state: SimState | None = None,
                 ) -> tuple[DetectorTrace, list[SimState]]:
    """Run a pulse sequence and record the exit intensities.

    `sequence` provides t_end_us, sample_rate, probe_samples(t),
    drive_samples(t) and readout_events() (see experiment.PulseSequence).
    Returns the detector trace |E+(L,t)|^2, |E-(0,t)|^2 and the
    spin-coherence norm, plus state snapshots (always including the final
    state).  E+ is injected at z=0 from the probe channel; nothing is
    injected into E-.
    """
    from .experiment import sequence_markers, switching_readout

    state = initial_state.copy() if initial_state is not None \
        else SimState.zeros(grid, classes)
    dt = grid.dz / m.c
    t_end = float(sequence.t_end_us)
    n_steps = int(round((t_end - state.t) / dt))
    if n_steps < 1:
        raise ValueError(f"t_end_us {t_end} shorter than one step {dt}")

    # Half-grid drive samples cover every RK4 stage time.
    t_half = state.t + 0.5 * dt * np.arange(2 * n_steps + 1)
    omega_c, omega_a, detuning_c, detuning_a = sequence.drive_samples(t_half)
    inject = sequence.probe_samples(t_half[0::2][:n_steps])
    _check_probe_resolution(sequence, m, grid)

    every = max(1, int(round(1.0 / (sequence.sample_rate * dt))))
    n_rec = n_steps // every + 1
    rec_t = np.empty(n_rec)
    rec_fwd = np.empty(n_rec)
    rec_bwd = np.empty(n_rec)
    rec_spin = np.empty(n_rec)
    readouts = []
    pending_reads = sorted(sequence.readout_events(), key=lambda e: e[0])
    snapshots: list[SimState] = []
    next_snap = snapshot_every_us if snapshot_every_us is not None else math.inf

    prop = _Propagator(m, state, detuning_c, detuning_a)
    i_rec = 0

    def record() -> None:
        nonlocal i_rec
        rec_t[i_rec] = prop.t
        rec_fwd[i_rec] = abs(prop.f[0, -1]) ** 2
        rec_bwd[i_rec] = abs(prop.f[1, 0]) ** 2
        rec_spin[i_rec] = prop.spin_norm()
        i_rec += 1

    record()
    for n in range(n_steps):
        prop.advect(inject[n], 0.0j, "open")
        n2 = 2 * n
        prop.local_update(omega_c[n2], omega_a[n2],
                          omega_c[n2 + 1], omega_a[n2 + 1],
                          omega_c[n2 + 2], omega_a[n2 + 2])
        prop.t += dt
        if pending_reads and prop.t >= pending_reads[0][0]:
            prop.sync_to_state(state)
            while pending_reads and prop.t >= pending_reads[0][0]:
                _, omega_y, dt_read = pending_reads.pop(0)
                readouts.append((prop.t, switching_readout(state, omega_y, dt_read)))
            prop.load_spin(state.s)
        if (n + 1) % every == 0:
            record()
        if (n + 1) % _FINITE_CHECK_EVERY == 0:
            prop.check_finite()
        if prop.t >= next_snap:
            prop.sync_to_state(state)
            snapshots.append(state.copy())
            next_snap += snapshot_every_us
    prop.check_finite()
    prop.sync_to_state(state)
    snapshots.append(state.copy())

    trace = DetectorTrace(
        t=rec_t[:i_rec], fwd_intensity=rec_fwd[:i_rec],
        bwd_intensity=rec_bwd[:i_rec], spin_norm=rec_spin[:i_rec],
        annotations=sequence_markers(sequence), readouts=tuple(readouts))
    return trace, snapshots


def _check_probe_resolution(sequence, m: MediumParams, grid: Grid) -> None:
    """Warn when the grid underresolves the compressed probe pulse."""
    duration = getattr(sequence, "probe_duration_us", None)
    omega = getattr(sequence, "writing_omega_c", None)
    if not duration or not omega:
        return
    from .medium import group_velocity
    v_g = group_velocity(m, abs(omega))
    if v_g <= 0.0:
        return
    cells = duration * v_g / grid.dz
    if cells < 16.0:
        warnings.warn(
            f"probe pulse spans {cells:.1f} cells at the group velocity; "
            "16 or more are recommended", stacklevel=3)


def balance_residual(omega_c: float, g_c: float, omega_a: float, g_a: float) -> float:
    """Normalized imbalance of the two coupling channels in [0, 1].

    |Omega_C/g_C - Omega_A/g_A| / (Omega_C/g_C + Omega_A/g_A); zero exactly
    when the two ratios are equal.
    """
    if g_c <= 0.0 or g_a <= 0.0:
        raise ValueError("coupling constants must be > 0")
    if omega_c < 0.0 or omega_a < 0.0:
        raise ValueError("Rabi frequencies must be >= 0")
    rc = omega_c / g_c
    ra = omega_a / g_a
    if rc + ra == 0.0:
        raise ValueError("at least one Rabi frequency must be nonzero")
    return abs(rc - ra) / (rc + ra)


def effective_velocity(m: MediumParams, omega_c: float, omega_a: float) -> float:
    """Signed drift velocity of the doubly driven polariton.

    c (Omega_C^2 - Omega_A^2) / (Omega_C^2 + Omega_A^2 + g2n), assuming
    equal coupling constants for the two channels.  Zero exactly at
    balance; equals group_velocity when Omega_A = 0.
    """
    if omega_c < 0.0 or omega_a < 0.0:
        raise ValueError("Rabi frequencies must be >= 0")
    den = omega_c ** 2 + omega_a ** 2 + m.g2n
    if den == 0.0:
        raise ValueError("all couplings are zero; velocity undefined")
    return m.c * (omega_c ** 2 - omega_a ** 2) / den


def excitation_number(state: SimState, m: MediumParams) -> float:
    """Total field plus atomic excitation in normalized units.

    sum_z dz [ |E+|^2 + |E-|^2 + sum_j w_j (|P+|^2 + |P-|^2 + |S|^2) ].
    Conserved when all decay rates and detunings vanish and the boundaries
    are closed.
    """
    w = state.weights
    fields = np.abs(state.e_plus) ** 2 + np.abs(state.e_minus) ** 2
    atoms = (np.abs(state.p_plus) ** 2 + np.abs(state.p_minus) ** 2
             + np.abs(state.s) ** 2) @ w
    return float((fields + atoms).sum() * state.grid.dz)


def field_centroid(state: SimState, floor: float = 1e-12) -> float:
    """Energy-weighted mean z of |E+|^2 + |E-|^2.

    Raises ValueError when the total field energy is at or below `floor`
    (the centroid is undefined for an empty grid).
    """
    intensity = np.abs(state.e_plus) ** 2 + np.abs(state.e_minus) ** 2
    total = intensity.sum() * state.grid.dz
    if total <= floor:
        raise ValueError(f"field energy {total:.3g} below floor {floor:.3g}")
    return float((intensity @ state.grid.z) / intensity.sum())
