"""Decay-curve fitting, group-delay extraction and four-wave-mixing
phase-matching checks.

The decay fitter is a damped Gauss-Newton iteration on one of two models,

    gaussian_sq:  I(t) = I0 * exp(-(t/tau)^2)
    exponential:  I(t) = I0 * exp(-t/tau)

initialized from a log-domain linear fit.  It is fully deterministic: a
fixed initialization, a fixed iteration cap and a fixed convergence
threshold on the relative step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DetectorTrace

MODELS = ("gaussian_sq", "exponential")

_MAX_ITER = 200
_STEP_TOL = 1e-10
_MAX_HALVINGS = 30


@dataclass(frozen=True)
class FitResult:
    """Best-fit amplitude and decay time with the residual that remains."""

    i0: float
    tau: float
    rms_residual: float
    n_points: int
    model: str
    converged: bool = True

    def __post_init__(self) -> None:
        if self.tau <= 0.0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.rms_residual < 0.0:
            raise ValueError("rms_residual must be >= 0")
        if self.n_points < 3:
            raise ValueError("a fit needs at least 3 points")
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")


def _model(t: np.ndarray, i0: float, tau: float, model: str) -> np.ndarray:
    if model == "gaussian_sq":
        return i0 * np.exp(-((t / tau) ** 2))
    return i0 * np.exp(-t / tau)


def _jacobian(t, i0, tau, model):
    m = _model(t, i0, tau, model)
    d_i0 = m / i0 if i0 != 0.0 else _model(t, 1.0, tau, model)
    if model == "gaussian_sq":
        d_tau = m * 2.0 * t * t / tau ** 3
    else:
        d_tau = m * t / tau ** 2
    return m, d_i0, d_tau


def fit_decay(points, model: str = "gaussian_sq") -> FitResult:
    """Least-squares fit of a decay law to (t, intensity) pairs.

    Zero-intensity points are excluded from the log-domain initialization
    but participate in the nonlinear refinement.  Non-decaying data (for
    example a constant series) is returned with `converged=False` and tau
    pushed to a large cap rather than raising.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (t, intensity) pairs")
    t = pts[:, 0]
    y = pts[:, 1]
    if len(t) < 3:
        raise ValueError(f"need at least 3 points, got {len(t)}")
    if np.any(t < 0.0):
        raise ValueError("times must be >= 0")
    if np.any(y < 0.0):
        raise ValueError("intensities must be >= 0")
    if len(np.unique(t)) < 2:
        raise ValueError("need at least two distinct times")
    if not np.any(y > 0.0):
        raise ValueError("all intensities are zero; nothing to fit")

    t_span = float(t.max() - t.min()) or 1.0
    tau_cap = 1e6 * t_span

    # Log-domain linear initialization on the positive points.
    pos = y > 0.0
    basis = (t * t) if model == "gaussian_sq" else t
    a, b = np.polynomial.polynomial.polyfit(basis[pos], np.log(y[pos]), 1)
    i0 = math.exp(a)
    if b < 0.0:
        tau = (1.0 / math.sqrt(-b)) if model == "gaussian_sq" else (-1.0 / b)
        tau = min(tau, tau_cap)
    else:
        tau = tau_cap  # non-decaying data

    converged = False
    sse = float(np.sum((_model(t, i0, tau, model) - y) ** 2))
    for _ in range(_MAX_ITER):
        m, d_i0, d_tau = _jacobian(t, i0, tau, model)
        r = m - y
        g = np.array([np.dot(d_i0, r), np.dot(d_tau, r)])
        h = np.array([[np.dot(d_i0, d_i0), np.dot(d_i0, d_tau)],
                      [np.dot(d_i0, d_tau), np.dot(d_tau, d_tau)]])
        try:
            delta = np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            break
        scale = 1.0
        for _ in range(_MAX_HALVINGS):
            i0_new = i0 - scale * delta[0]
            tau_new = tau - scale * delta[1]
            if tau_new <= 0.0 or tau_new > tau_cap:
                scale *= 0.5
                continue
            sse_new = float(np.sum((_model(t, i0_new, tau_new, model) - y) ** 2))
            if sse_new <= sse:
                break
            scale *= 0.5
        else:
            break
        rel_step = max(abs(i0_new - i0) / max(abs(i0), 1e-300),
                       abs(tau_new - tau) / tau)
        i0, tau, sse = i0_new, tau_new, sse_new
        if rel_step < _STEP_TOL:
            converged = True
            break
    if tau >= 0.99 * tau_cap:
        converged = False  # flagged non-decaying
    rms = math.sqrt(sse / len(t))
    return FitResult(i0=float(i0), tau=float(tau), rms_residual=rms,
                     n_points=len(t), model=model, converged=converged)


def group_delay(trace: DetectorTrace, reference: DetectorTrace) -> float:
    """Intensity-weighted centroid delay of `trace` against `reference`.

    Both traces must contain a single dominant forward peak; secondary
    local maxima above half the main peak raise an error.
    """
    c_trace = _single_peak_centroid(trace, "trace")
    c_ref = _single_peak_centroid(reference, "reference")
    return c_trace - c_ref


def _single_peak_centroid(trace: DetectorTrace, label: str) -> float:
    y = np.asarray(trace.fwd_intensity, dtype=float)
    t = np.asarray(trace.t, dtype=float)
    peak = y.max(initial=0.0)
    if peak <= 0.0:
        raise ValueError(f"no peak found in {label}")
    interior = (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]) & (y[1:-1] > 0.5 * peak)
    if int(interior.sum()) > 1:
        raise ValueError(f"multiple comparable peaks in {label}")
    return float(np.dot(t, y) / y.sum())


@dataclass(frozen=True)
class WaveVector:
    """A 3-component wave vector in normalized magnitude units."""

    components: tuple[float, float, float]

    @classmethod
    def from_components(cls, x: float, y: float, z: float) -> "WaveVector":
        return cls((float(x), float(y), float(z)))

    @classmethod
    def from_direction(cls, magnitude: float, direction) -> "WaveVector":
        d = np.asarray(direction, dtype=float)
        norm = float(np.linalg.norm(d))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"direction must be a unit vector, |d| = {norm!r}")
        return cls(tuple(float(v) for v in magnitude * d))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.components, dtype=float)

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    @property
    def direction(self) -> np.ndarray:
        mag = self.magnitude
        if mag == 0.0:
            raise ValueError("zero vector has no direction")
        return self.as_array() / mag

    def angle_to(self, other: "WaveVector") -> float:
        cosang = float(np.clip(np.dot(self.direction, other.direction), -1.0, 1.0))
        return math.acos(cosang)


def phase_match(k_c: WaveVector, k_p: WaveVector, k_a: WaveVector
                ) -> tuple[WaveVector, float]:
    """Conjugate wave vector k_PC = k_C - k_P + k_A and its shell mismatch.

    The mismatch is | |k_PC| - |k_P| | / |k_P|, the fractional deviation of
    the conjugate from the probe momentum shell.
    """
    arrays = [k.as_array() for k in (k_c, k_p, k_a)]
    if not all(np.isfinite(a).all() for a in arrays):
        raise ValueError("wave vectors must be finite")
    if k_p.magnitude == 0.0:
        raise ValueError("probe wave vector must be nonzero")
    k_pc = WaveVector(tuple(arrays[0] - arrays[1] + arrays[2]))
    mismatch = abs(k_pc.magnitude - k_p.magnitude) / k_p.magnitude
    return k_pc, mismatch
