"""Intensity modulator and balanced-MZI polarization modulator models.

The modulator chain is an intensity modulator followed by a polarization
modulator: a 45 deg splitter (with a small offset ``delta``), two phase
modulator arms driven by voltages v1/v2, a combiner, and a quarter-wave
output rotation that brings the modulation from the circular-diagonal
plane onto the linear plane of the Poincare sphere.  The compositional
pipeline here additionally contains a fixed rotator(-pi/4) output frame
alignment; physically this is the output fiber polarization controller
setting that aligns the modulator frame with the receiver frame, and with
it the pipeline agrees with the closed-form output to machine precision.

Two Stokes-output conventions coexist:

* ``output_stokes`` - closed form in the modulator frame,
  S = (1, cos(T) cos(2d), sin(T) cos(2d), sin(2d)),
  T = (v1 - v2) pi / v_pi_pm + phi0.
* ``output_stokes_receiver`` - the receiver-frame relabeling (S1 and S2
  swapped), valid on the equator (delta = 0), in which the BB84 drive
  table is stated.  All H/D/V/A assertions use this form.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .polarization import jones_to_mueller, retarder, rotator, stokes_from_jones


@dataclass(frozen=True)
class ModulatorConfig:
    """Physical parameters of the intensity-and-polarization modulator.

    ``phi0_operating`` pins the zero-voltage MZI phase at the tuned
    operating point (the laser wavelength is adjusted in practice until
    phi0 = pi/4, which minimizes drive voltages); set it to None to derive
    phi0 from the geometry (n_1, delta_l, wavelength) instead.
    Temperature drift enters as ``temp_coeff * temp_delta`` added to the
    operating phase.
    """

    v_pi_im: float = 4.0          # intensity modulator half-wave voltage [V]
    v_pi_pm: float = 4.0          # phase modulator half-wave voltage [V]
    mod_depth: float = 1.0        # intensity modulation depth b, in [0, 1]
    phi_1: float = 0.0            # IM zero-voltage phase [rad]
    delta: float = 0.0            # splitter rotation offset [rad]
    delta_l: float = 6.0e-3       # MZI arm length imbalance [m]
    n_1: float = 1.468            # effective fiber index
    wavelength: float = 1550e-9   # operating wavelength [m]
    qwp_retardance: float = 0.93 * np.pi / 2  # receiver QWP actual retardance
    phi0_operating: float | None = np.pi / 4
    temp_coeff: float = 0.0       # d(phi0)/dT [rad/K]
    temp_delta: float = 0.0       # T - T0 [K]

    def __post_init__(self) -> None:
        if self.v_pi_im <= 0 or self.v_pi_pm <= 0:
            raise ValueError("half-wave voltages must be positive")
        if not 0.0 <= self.mod_depth <= 1.0:
            raise ValueError(f"mod_depth must be in [0, 1], got {self.mod_depth}")
        if self.delta_l < 0:
            raise ValueError(f"delta_l must be >= 0, got {self.delta_l}")
        if self.n_1 <= 1.0:
            raise ValueError(f"n_1 must exceed 1, got {self.n_1}")
        if self.wavelength <= 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")


@dataclass(frozen=True)
class DriveSettings:
    """Drive voltages: v0 on the intensity modulator, v1/v2 on the MZI arms."""

    v0: float
    v1: float
    v2: float


class Bb84State(enum.Enum):
    H = "H"
    D = "D"
    V = "V"
    A = "A"


#: Table of MZI arm voltages per BB84 state, in units of v_pi_pm.
#: Settings are symmetric around zero volts (v1 + v2 = 0, no DC bias).
BB84_DRIVE_FRACTIONS = {
    Bb84State.H: (1 / 8, -1 / 8),
    Bb84State.D: (-1 / 8, 1 / 8),
    Bb84State.V: (-3 / 8, 3 / 8),
    Bb84State.A: (3 / 8, -3 / 8),
}

#: Receiver-frame Stokes targets for the four BB84 states.
BB84_TARGET_STOKES = {
    Bb84State.H: np.array([1.0, 1.0, 0.0, 0.0]),
    Bb84State.D: np.array([1.0, 0.0, 1.0, 0.0]),
    Bb84State.V: np.array([1.0, -1.0, 0.0, 0.0]),
    Bb84State.A: np.array([1.0, 0.0, -1.0, 0.0]),
}


def im_transmission(v0: float, cfg: ModulatorConfig):
    """Intensity modulator transfer 0.5 * (1 + b cos(v0 pi / V_pi + phi_1))."""
    return 0.5 * (1.0 + cfg.mod_depth * np.cos(v0 * np.pi / cfg.v_pi_im + cfg.phi_1))


def phi0(wavelength: float, cfg: ModulatorConfig):
    """Zero-voltage MZI phase from the arm imbalance, 2 pi n_1 delta_l / lambda.

    Returns the unwrapped value (linear in wavenumber m = 1/lambda);
    consumers reduce modulo 2 pi where needed.
    """
    wavelength = np.asarray(wavelength, dtype=float)
    if np.any(wavelength <= 0):
        raise ValueError("wavelength must be positive")
    return cfg.n_1 * 2.0 * np.pi * cfg.delta_l / wavelength


def operating_phi0(cfg: ModulatorConfig) -> float:
    """Effective zero-voltage phase used by the modulator operations."""
    base = cfg.phi0_operating
    if base is None:
        base = float(phi0(cfg.wavelength, cfg))
    return base + cfg.temp_coeff * cfg.temp_delta


def mzi_jones(v1: float, v2: float, cfg: ModulatorConfig) -> np.ndarray:
    """Diagonal MZI Jones matrix diag(e^{j(v1 pi/V_pi + phi0)}, e^{j v2 pi/V_pi})."""
    p0 = operating_phi0(cfg)
    return np.array(
        [
            [np.exp(1j * (v1 * np.pi / cfg.v_pi_pm + p0)), 0.0],
            [0.0, np.exp(1j * v2 * np.pi / cfg.v_pi_pm)],
        ]
    )


def modulator_jones(v1: float, v2: float, cfg: ModulatorConfig) -> np.ndarray:
    """Full compositional Jones matrix of the polarization modulator.

    rotator(-pi/4) [output frame alignment] . QWP(-pi/4) . MZI(v1, v2)
    . rotator(pi/4 + delta); the splitter/combiner act as identity in this
    basis (the MZI matrix is diagonal between them).
    """
    return (
        rotator(-np.pi / 4)
        @ retarder(-np.pi / 4, np.pi / 2)
        @ mzi_jones(v1, v2, cfg)
        @ rotator(np.pi / 4 + cfg.delta)
    )


def modulator_mueller(v1: float, v2: float, cfg: ModulatorConfig) -> np.ndarray:
    """Mueller matrix of the full compositional pipeline."""
    return jones_to_mueller(modulator_jones(v1, v2, cfg))


def drive_angle(v1, v2, cfg: ModulatorConfig):
    """Voltage modulation angle T = (v1 - v2) pi / v_pi_pm + phi0."""
    return (np.asarray(v1, dtype=float) - np.asarray(v2, dtype=float)) * np.pi / cfg.v_pi_pm + operating_phi0(cfg)


def output_stokes(v1, v2, cfg: ModulatorConfig) -> np.ndarray:
    """Closed-form output Stokes vector for horizontal input light.

    S = (1, cos(T) cos(2 delta), sin(T) cos(2 delta), sin(2 delta)); the
    output depends on the arm voltages only through v1 - v2 and lies on
    the Poincare equator when delta = 0.  Broadcasts over v1/v2 arrays,
    returning shape (..., 4).
    """
    theta = drive_angle(v1, v2, cfg)
    c2d = np.cos(2.0 * cfg.delta)
    s1 = np.cos(theta) * c2d
    s2 = np.sin(theta) * c2d
    s3 = np.full_like(s1, np.sin(2.0 * cfg.delta))
    return np.stack([np.ones_like(s1), s1, s2, s3], axis=-1)


def output_stokes_receiver(v1, v2, cfg: ModulatorConfig) -> np.ndarray:
    """Receiver-frame output Stokes, S = (1, sin(T), cos(T), 0).

    This is the closed form with S1 and S2 relabeled (a fixed 45 deg
    frame rotation absorbed by the receiver alignment); the BB84 drive
    table is stated in this convention.  Valid on the equator (delta = 0).
    """
    theta = drive_angle(v1, v2, cfg)
    s1 = np.sin(theta)
    s2 = np.cos(theta)
    zeros = np.zeros_like(s1)
    return np.stack([np.ones_like(s1), s1, s2, zeros], axis=-1)


def bb84_drive(state: Bb84State, cfg: ModulatorConfig, v0: float = 0.0) -> DriveSettings:
    """MZI arm voltages for a BB84 state (drive table, phi0 = pi/4 operating point)."""
    f1, f2 = BB84_DRIVE_FRACTIONS[Bb84State(state)]
    return DriveSettings(v0=v0, v1=f1 * cfg.v_pi_pm, v2=f2 * cfg.v_pi_pm)


def bb84_table(cfg: ModulatorConfig) -> list[tuple[Bb84State, DriveSettings, np.ndarray]]:
    """Drive settings and receiver-frame Stokes output for all four states."""
    rows = []
    for state in Bb84State:
        drive = bb84_drive(state, cfg)
        rows.append((state, drive, output_stokes_receiver(drive.v1, drive.v2, cfg)))
    return rows


def wavelength_scan(cfg: ModulatorConfig, polarizer_angle: float, wavelengths) -> np.ndarray:
    """Transmitted intensity 0.5 (1 + cos(2 theta) cos(phi0(lambda))) per wavelength.

    Models the polarizer + quarter-wave analyzer scan used to measure the
    arm imbalance; intensities are normalized to unit input.  The phase
    follows the geometric phi0(lambda) (the scan exists to measure it), so
    ``phi0_operating`` is deliberately ignored here.
    """
    lam = np.asarray(wavelengths, dtype=float)
    return 0.5 * (1.0 + np.cos(2.0 * polarizer_angle) * np.cos(phi0(lam, cfg)))


@dataclass(frozen=True)
class ScanFit:
    """Result of a fringe fit: arm imbalance plus fit diagnostics."""

    delta_l: float
    contrast: float
    phase: float
    residual_rms: float
    periods_spanned: float


def fit_delta_l(wavelengths, intensities, n_1: float,
                max_residual_rms: float | None = None) -> ScanFit:
    """Fit I(m) = 0.5 (1 + C cos(2 pi n_1 dL m + psi)) over wavenumber m.

    A coarse frequency seed comes from the dominant discrete-frequency
    component of the mean-removed scan (resampled uniformly in m), then a
    damped Gauss-Newton refines (frequency, C, psi).  The plain cosine fit
    is non-convex, so the frequency-domain seed is what keeps it out of
    local minima.

    Raises
    ------
    ValueError
        If fewer than two full oscillation periods are spanned, if the
        scan shows no oscillation, or if the residual RMS exceeds
        ``max_residual_rms`` (when given).
    """
    lam = np.asarray(wavelengths, dtype=float)
    y = np.asarray(intensities, dtype=float)
    if lam.ndim != 1 or lam.shape != y.shape or lam.size < 8:
        raise ValueError("scan must be two equal-length 1-d arrays of at least 8 points")
    dlam = np.diff(lam)
    if not (np.all(dlam > 0) or np.all(dlam < 0)):
        raise ValueError("wavelength grid must be monotone")

    m = 1.0 / lam
    order = np.argsort(m)
    m, y = m[order], y[order]
    span = m[-1] - m[0]

    centered = y - y.mean()
    if float(np.sqrt(np.mean(centered**2))) < 1e-6:
        raise ValueError("scan is constant: no oscillation to fit")

    # frequency seed: resample uniformly in m, take the dominant rfft bin
    n_fft = 1 << max(10, int(np.ceil(np.log2(4 * m.size))))
    m_uniform = np.linspace(m[0], m[-1], n_fft)
    spectrum = np.abs(np.fft.rfft(np.interp(m_uniform, m, centered)))
    spectrum[0] = 0.0
    peak = int(np.argmax(spectrum))
    if peak == 0 or spectrum[peak] < 1e-9:
        raise ValueError("scan shows no oscillation")
    # parabolic interpolation around the peak bin
    if 1 <= peak < spectrum.size - 1:
        s_l, s_c, s_r = spectrum[peak - 1 : peak + 2]
        denom = s_l - 2 * s_c + s_r
        shift = 0.5 * (s_l - s_r) / denom if abs(denom) > 0 else 0.0
    else:
        shift = 0.0
    # bin k of the resampled grid (spacing span/(n_fft-1)) sits at
    # k (n_fft-1) / (n_fft span) cycles per unit m
    freq = (peak + shift) * (n_fft - 1) / (n_fft * span)

    periods = freq * span
    if periods < 2.0:
        raise ValueError(
            f"only {periods:.2f} oscillation periods spanned; need at least 2 to identify the frequency"
        )

    # phase/contrast seed by linear least squares at the seeded frequency
    def quadrature_seed(f):
        cw = np.cos(2 * np.pi * f * m)
        sw = np.sin(2 * np.pi * f * m)
        design = np.column_stack([cw, sw])
        coef, *_ = np.linalg.lstsq(design, 2.0 * centered, rcond=None)
        a, b = coef
        return float(np.hypot(a, b)), float(np.arctan2(-b, a))

    contrast, psi = quadrature_seed(freq)
    params = np.array([freq, contrast, psi])

    def residuals(p):
        f, c, ps = p
        return 0.5 * (1.0 + c * np.cos(2 * np.pi * f * m + ps)) - y

    def jacobian(p):
        f, c, ps = p
        arg = 2 * np.pi * f * m + ps
        return np.column_stack(
            [-np.pi * c * m * np.sin(arg), 0.5 * np.cos(arg), -0.5 * c * np.sin(arg)]
        )

    # damped Gauss-Newton on (frequency, contrast, phase)
    cost = float(np.sum(residuals(params) ** 2))
    for _ in range(60):
        r = residuals(params)
        jac = jacobian(params)
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        lam_damp = 1.0
        improved = False
        for _ in range(12):
            trial = params + lam_damp * step
            trial_cost = float(np.sum(residuals(trial) ** 2))
            if trial_cost < cost:
                params, cost = trial, trial_cost
                improved = True
                break
            lam_damp *= 0.5
        if not improved or float(np.abs(lam_damp * step[0])) < 1e-14 * abs(params[0]):
            break

    freq, contrast, psi = params
    if contrast < 0:
        contrast, psi = -contrast, psi + np.pi
    rms = float(np.sqrt(np.mean(residuals(params) ** 2)))
    if max_residual_rms is not None and rms > max_residual_rms:
        raise ValueError(f"fit residual RMS {rms:.3e} exceeds ceiling {max_residual_rms:.3e}")
    return ScanFit(
        delta_l=float(freq / n_1),
        contrast=float(contrast),
        phase=float(np.mod(psi, 2 * np.pi)),
        residual_rms=rms,
        periods_spanned=float(freq * span),
    )


def triangular_wave(phase) -> np.ndarray:
    """Unit triangular wave of period 1: 0 -> +1 -> 0 -> -1 -> 0 over one period."""
    x = np.mod(np.asarray(phase, dtype=float) - 0.25, 1.0)
    return 4.0 * np.abs(x - 0.5) - 1.0


def poincare_trace(cfg: ModulatorConfig, amplitude: float | None = None,
                   n_periods: int = 2, samples_per_period: int = 512):
    """Poincare-sphere trace under push-pull triangular arm drive.

    v1 = A tri(t), v2 = -A tri(t); default amplitude A = v_pi_pm / 2 makes
    the differential voltage span 2 v_pi so the trace covers a full great
    circle.  Returns (t, v1, v2, stokes) with stokes of shape (n, 4).
    """
    if amplitude is None:
        amplitude = cfg.v_pi_pm / 2.0
    n = n_periods * samples_per_period
    t = np.arange(n) / samples_per_period
    v1 = amplitude * triangular_wave(t)
    v2 = -v1
    return t, v1, v2, output_stokes(v1, v2, cfg)
