"""Atomic medium description.

Defines the medium parameters, discretizes the inhomogeneous spin
distribution into weighted spectral classes, and provides the steady-state
linear response (susceptibility, group velocity, dephasing time) of a
three-level Lambda system driven by a strong coupling field.

Units: time in microseconds, rates and detunings in rad/us, the medium
length in normalized units (the full sample is ``length``), and the vacuum
speed ``c`` in length units per microsecond.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# FWHM of a unit-sigma Gaussian.
_GAUSS_FWHM = 2.0 * math.sqrt(2.0 * math.log(2.0))

# Lorentzian ensembles are truncated at +/- this many FWHM; the heavy tails
# otherwise dominate second moments and defeat any fixed-order quadrature.
_LORENTZ_TRUNCATION_FWHM = 10.0


def khz_to_rad_per_us(f_khz: float) -> float:
    """Convert an ordinary frequency in kHz to an angular rate in rad/us."""
    return TWO_PI * 1e-3 * f_khz


@dataclass(frozen=True)
class SpectralClass:
    """One spin-detuning sample of the inhomogeneous ensemble.

    delta_j is the two-photon (spin) detuning in rad/us, weight the
    quadrature weight (the full ensemble sums to one).  delta_opt is an
    optional optical-detuning offset; it defaults to zero because spectral
    hole burning prepares a narrow optical feature.
    """

    delta_j: float
    weight: float
    delta_opt: float = 0.0


@dataclass
class MediumParams:
    """Decay rates, inhomogeneous width and coupling strength of the medium.

    gamma_opt / gamma_spin are the optical and spin decay rates entering the
    equations of motion as gamma/2 on the respective amplitudes.  When not
    given they default to 1/t1_opt and 1/t2_spin.  g2n is the collective
    coupling strength g^2*N in rad^2/us^2; use ``from_optical_depth`` to set
    it through the resonant optical depth d = g2n*length/(gamma_opt*c).
    """

    delta_s_khz: float = 30.0
    t1_opt: float = 110.0
    t1_spin: float = 6.0e7
    t2_spin: float = 500.0
    gamma_opt: float | None = None
    gamma_spin: float | None = None
    g2n: float = 0.0
    g_c: float = 1.0
    g_a: float = 1.0
    length: float = 1.0
    c: float = 100.0

    def __post_init__(self) -> None:
        for name in ("t1_opt", "t1_spin", "t2_spin", "g_c", "g_a",
                     "length", "c"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        if self.gamma_opt is None:
            self.gamma_opt = 1.0 / self.t1_opt
        if self.gamma_spin is None:
            self.gamma_spin = 1.0 / self.t2_spin
        # Zero decay rates are accepted as the lossless idealization used
        # by conservation checks; negative rates never are.
        for name in ("gamma_opt", "gamma_spin"):
            value = getattr(self, name)
            if not (value >= 0.0 and math.isfinite(value)):
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
        if self.delta_s_khz < 0.0:
            raise ValueError(f"delta_s_khz must be >= 0, got {self.delta_s_khz!r}")
        if self.g2n < 0.0 or not math.isfinite(self.g2n):
            raise ValueError(f"g2n must be finite and >= 0, got {self.g2n!r}")
        if self.gamma_opt > 0.0:
            d = self.optical_depth
            if not (math.isfinite(d) and d >= 0.0):
                raise ValueError(f"optical depth must be finite and >= 0, got {d!r}")

    @property
    def optical_depth(self) -> float:
        """Resonant optical depth d = g2n * length / (gamma_opt * c)."""
        if self.gamma_opt == 0.0:
            return math.inf if self.g2n > 0.0 else 0.0
        return self.g2n * self.length / (self.gamma_opt * self.c)

    @property
    def transit_time(self) -> float:
        """Vacuum transit time length/c in us."""
        return self.length / self.c

    @classmethod
    def from_optical_depth(cls, optical_depth: float, **kwargs) -> "MediumParams":
        """Build parameters with g2n chosen to match a resonant optical depth."""
        if optical_depth < 0.0:
            raise ValueError(f"optical_depth must be >= 0, got {optical_depth!r}")
        m = cls(**kwargs)
        m.g2n = optical_depth * m.gamma_opt * m.c / m.length
        return m


def dephasing_time(delta_s_khz: float) -> float:
    """Spin dephasing time 1/(pi * delta_S) in us for a width in kHz.

    This is the 1/e time of the free-decay envelope of a Lorentzian
    ensemble of FWHM delta_S.
    """
    if delta_s_khz <= 0.0:
        raise ValueError(f"delta_s_khz must be > 0, got {delta_s_khz!r}")
    return 1000.0 / (math.pi * delta_s_khz)


def make_spectral_classes(delta_s_khz: float, n: int,
                          shape: str = "lorentzian") -> list[SpectralClass]:
    """Discretize the spin inhomogeneous distribution into n weighted classes.

    shape selects the line shape: 'lorentzian' (equal-probability
    inverse-CDF midpoints on the truncated support), 'gaussian'
    (Gauss-Hermite nodes, exact low-order moments) or 'single' (one class at
    zero detuning, requires n == 1).  delta_s_khz is the FWHM in kHz.
    Weights always sum to one and detunings come in symmetric +/- pairs.
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise ValueError(f"n must be an integer, got {n!r}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n!r}")
    if delta_s_khz < 0.0:
        raise ValueError(f"delta_s_khz must be >= 0, got {delta_s_khz!r}")
    if shape == "single":
        if n != 1:
            raise ValueError(f"shape='single' requires n=1, got n={n}")
        return [SpectralClass(0.0, 1.0)]
    if shape not in ("lorentzian", "gaussian"):
        raise ValueError(f"unknown shape {shape!r}")

    fwhm = khz_to_rad_per_us(delta_s_khz)
    if fwhm == 0.0:
        return [SpectralClass(0.0, 1.0 / n) for _ in range(n)]

    if shape == "lorentzian":
        hwhm = 0.5 * fwhm
        cut = _LORENTZ_TRUNCATION_FWHM * fwhm
        p_lo = 0.5 + math.atan(-cut / hwhm) / math.pi
        p_hi = 0.5 + math.atan(cut / hwhm) / math.pi
        probs = p_lo + (p_hi - p_lo) * (np.arange(n) + 0.5) / n
        deltas = hwhm * np.tan(math.pi * (probs - 0.5))
        weights = np.full(n, 1.0 / n)
    else:
        sigma = fwhm / _GAUSS_FWHM
        nodes, gh_weights = np.polynomial.hermite.hermgauss(n)
        deltas = math.sqrt(2.0) * sigma * nodes
        weights = gh_weights / gh_weights.sum()

    # Guarantee the +/- pairing exactly despite floating-point noise.
    deltas = 0.5 * (deltas - deltas[::-1])
    return [SpectralClass(float(d), float(w)) for d, w in zip(deltas, weights)]


def class_arrays(classes) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unpack a class list into (delta_j, weight, delta_opt) arrays."""
    deltas = np.array([c.delta_j for c in classes], dtype=float)
    weights = np.array([c.weight for c in classes], dtype=float)
    delta_opt = np.array([c.delta_opt for c in classes], dtype=float)
    return deltas, weights, delta_opt


def free_decay_envelope(classes, t) -> np.ndarray:
    """|sum_j w_j exp(i delta_j t)|, the free dephasing envelope."""
    deltas, weights, _ = class_arrays(classes)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    phases = np.exp(1j * np.outer(t, deltas))
    return np.abs(phases @ weights)


def susceptibility(delta_p, omega_c: float, m: MediumParams,
                   classes=None) -> np.ndarray | complex:
    """Steady-state dimensionless susceptibility of the driven Lambda medium.

    chi(delta_p) = i*gamma_opt*(gamma_s - i(delta_p - delta_j)) /
                   [(gamma_opt - i*delta_p)(gamma_s - i(delta_p - delta_j))
                    + omega_c^2/4]

    averaged over the spectral classes.  The prefactor normalizes the
    resonant two-level case to Im chi = 1, so exp(-d*Im chi) is the
    intensity transmission at optical depth d.  Im chi >= 0 everywhere.
    """
    if omega_c < 0.0:
        raise ValueError(f"omega_c must be >= 0, got {omega_c!r}")
    if classes is None:
        classes = [SpectralClass(0.0, 1.0)]
    if len(classes) == 0:
        raise ValueError("classes must be non-empty")
    dp = np.asarray(delta_p, dtype=float)
    scalar = dp.ndim == 0
    dp = np.atleast_1d(dp)

    deltas, weights, delta_opt = class_arrays(classes)
    gs = m.gamma_spin
    go = m.gamma_opt
    chi = np.zeros(dp.shape, dtype=complex)
    coupling = 0.25 * omega_c * omega_c
    for dj, w, dopt in zip(deltas, weights, delta_opt):
        spin = gs - 1j * (dp - dj)
        opt = go - 1j * (dp - dopt)
        den = opt * spin + coupling
        with np.errstate(divide="ignore", invalid="ignore"):
            term = 1j * go * spin / den
        bad = den == 0.0
        if np.any(bad):
            # den == 0 with coupling on means spin == 0: exact transparency.
            # With the coupling off it is the resonant two-level limit.
            if coupling > 0.0:
                term = np.where(bad, 0.0 + 0.0j, term)
            else:
                term = np.where(bad, 1j * go / opt, term)
        chi += w * term
    return complex(chi[0]) if scalar else chi


def group_velocity(m: MediumParams, omega_c: float) -> float:
    """EIT group velocity c / (1 + g2n / omega_c^2).

    omega_c == 0 is reported as the stopped-light result 0.0 rather than an
    exception; negative values are rejected.
    """
    if omega_c < 0.0:
        raise ValueError(f"omega_c must be >= 0, got {omega_c!r}")
    if omega_c == 0.0:
        return 0.0
    return m.c / (1.0 + m.g2n / (omega_c * omega_c))
