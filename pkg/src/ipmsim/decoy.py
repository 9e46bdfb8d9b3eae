"""Vacuum+weak decoy-state BB84 key-rate engine.

Channel model (Poissonian weak coherent pulses, threshold detectors):

    eta  = 10^(-loss_db/10) * detector_efficiency
    Y0   = num_detectors * dark_rate * gate_window      (per pulse)
    Q_x  = Y0 + 1 - exp(-eta x)                          x in {mu, nu}
    E_x Q_x = e0 Y0 + e_d (1 - exp(-eta x))

Decoy bounds on the single-photon contribution:

    Q1_L = mu^2 e^-mu / (mu nu - nu^2)
           * ( Q_nu e^nu - Q_mu e^mu nu^2/mu^2 - (mu^2 - nu^2)/mu^2 Y0 )
    e1_U = (E_nu Q_nu e^nu - e0 Y0) mu e^-mu / (nu Q1_L)

Secure rate per pulse:

    R = q L_mu { -Q_mu f H2(QBER) + Q1_L [1 - H2(e1_U)] }

with L_mu = p_signal / (p_signal + p_decoy) and QBER = E_mu.  Negative
rates clamp to zero (flagged) so loss sweeps cross the threshold smoothly.
All functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class ProtocolParams:
    """Decoy-BB84 protocol settings.

    Defaults are the projected-performance operating point: signal 0.6 and
    decoy 0.2 photons per pulse, basis reconciliation q = 1/2, constant
    error-correction efficiency 1.22, vacuum error rate 0.5, and a
    2:1:1 signal/decoy/vacuum pulse allocation.
    """

    mu: float = 0.6
    nu: float = 0.2
    q: float = 0.5
    f_ec: float = 1.22
    e0: float = 0.5
    p_signal: float = 0.5
    p_decoy: float = 0.25
    p_vacuum: float = 0.25

    def __post_init__(self) -> None:
        if not 0.0 < self.nu < self.mu < 1.0:
            raise ValueError(
                f"need 0 < nu < mu < 1 (mu*nu - nu^2 must be positive), got mu={self.mu}, nu={self.nu}"
            )
        if not 0.0 < self.q <= 1.0:
            raise ValueError(f"q must be in (0, 1], got {self.q}")
        if self.f_ec < 1.0:
            raise ValueError(f"error-correction efficiency must be >= 1, got {self.f_ec}")
        if not 0.0 <= self.e0 <= 1.0:
            raise ValueError(f"e0 must be in [0, 1], got {self.e0}")
        for name in ("p_signal", "p_decoy", "p_vacuum"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        total = self.p_signal + self.p_decoy + self.p_vacuum
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"pulse allocation must sum to 1, got {total}")

    @property
    def l_mu(self) -> float:
        """Signal fraction among non-vacuum pulses, N_mu / (N_mu + N_nu)."""
        if self.p_signal + self.p_decoy <= 0:
            raise ValueError("l_mu undefined: no signal or decoy pulses allocated")
        return self.p_signal / (self.p_signal + self.p_decoy)


@dataclass(frozen=True)
class ChannelParams:
    """Link and receiver settings.

    ``gate_window`` is the effective per-pulse coincidence window for dark
    counts; the sub-ns default reflects the temporal filtering a
    picosecond-pulse system can apply.
    """

    total_loss_db: float = 45.0
    detector_efficiency: float = 0.6
    dark_rate: float = 50.0          # counts/s per detector
    num_detectors: int = 4
    rep_rate: float = 76e6           # pulses/s
    intrinsic_qber: float = 0.01
    gate_window: float = 1e-10       # s

    def __post_init__(self) -> None:
        if self.total_loss_db < 0:
            raise ValueError(f"total_loss_db must be >= 0, got {self.total_loss_db}")
        if not 0.0 < self.detector_efficiency <= 1.0:
            raise ValueError(
                f"detector_efficiency must be in (0, 1], got {self.detector_efficiency}"
            )
        if self.dark_rate < 0:
            raise ValueError(f"dark_rate must be >= 0, got {self.dark_rate}")
        if self.num_detectors < 1:
            raise ValueError(f"num_detectors must be >= 1, got {self.num_detectors}")
        if self.rep_rate <= 0:
            raise ValueError(f"rep_rate must be positive, got {self.rep_rate}")
        if not 0.0 <= self.intrinsic_qber <= 1.0:
            raise ValueError(f"intrinsic_qber must be in [0, 1], got {self.intrinsic_qber}")
        if self.gate_window < 0:
            raise ValueError(f"gate_window must be >= 0, got {self.gate_window}")


@dataclass(frozen=True)
class GainsAndErrors:
    q_mu: float
    q_nu: float
    e_mu: float
    e_nu: float
    y0: float


@dataclass(frozen=True)
class RatePoint:
    """One operating point of the rate curve."""

    loss_db: float
    q_mu: float
    q_nu: float
    e_mu: float
    e_nu: float
    y0: float
    q1_lower: float
    e1_upper: float
    qber: float
    rate_per_pulse: float
    rate_per_second: float
    flags: tuple[str, ...] = field(default=())


def transmittance(ch: ChannelParams) -> float:
    """Overall transmittance eta = 10^(-loss/10) * detector efficiency."""
    return 10.0 ** (-ch.total_loss_db / 10.0) * ch.detector_efficiency


def vacuum_yield(ch: ChannelParams) -> float:
    """Background click probability per pulse across all detectors."""
    return ch.num_detectors * ch.dark_rate * ch.gate_window


def gains_and_errors(p: ProtocolParams, ch: ChannelParams) -> GainsAndErrors:
    """Gains Q_mu/Q_nu and total error rates E_mu/E_nu plus the vacuum yield."""
    eta = transmittance(ch)
    y0 = vacuum_yield(ch)
    e_d = ch.intrinsic_qber

    def gain_error(x: float) -> tuple[float, float]:
        click = -math.expm1(-eta * x)     # 1 - e^(-eta x), precise at high loss
        q = y0 + click
        err = (p.e0 * y0 + e_d * click) / q if q > 0 else p.e0
        return q, err

    q_mu, e_mu = gain_error(p.mu)
    q_nu, e_nu = gain_error(p.nu)
    return GainsAndErrors(q_mu=q_mu, q_nu=q_nu, e_mu=e_mu, e_nu=e_nu, y0=y0)


def q1_lower(p: ProtocolParams, q_mu: float, q_nu: float, y0: float) -> float:
    """Lower bound on the single-photon gain; negative values clamp to 0."""
    denom = p.mu * p.nu - p.nu**2
    if denom <= 0:
        raise ValueError(f"mu must exceed nu (mu*nu - nu^2 > 0), got mu={p.mu}, nu={p.nu}")
    raw = (
        p.mu**2
        * math.exp(-p.mu)
        / denom
        * (
            q_nu * math.exp(p.nu)
            - q_mu * math.exp(p.mu) * p.nu**2 / p.mu**2
            - (p.mu**2 - p.nu**2) / p.mu**2 * y0
        )
    )
    return max(raw, 0.0)


def e1_upper(p: ProtocolParams, q1_low: float, e_nu: float, q_nu: float, y0: float) -> float:
    """Upper bound on the single-photon error rate, clamped to [0, 1]."""
    if q1_low <= 0:
        raise ValueError("e1 bound undefined for Q1_lower <= 0; treat the rate as 0")
    raw = (e_nu * q_nu * math.exp(p.nu) - p.e0 * y0) * p.mu * math.exp(-p.mu) / (p.nu * q1_low)
    return min(max(raw, 0.0), 1.0)


def binary_entropy(x: float) -> float:
    """Binary entropy H2(x) in bits, with H2(0) = H2(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def _rate_per_pulse_raw(p: ProtocolParams, ge: GainsAndErrors) -> tuple[float, float, float, tuple[str, ...]]:
    """Unclamped per-pulse rate plus the decoy bounds and diagnostic flags."""
    flags: list[str] = []
    q1 = q1_lower(p, ge.q_mu, ge.q_nu, ge.y0)
    if q1 <= 0.0:
        flags.append("no_single_photon_gain")
        ec = p.q * p.l_mu * (-ge.q_mu * p.f_ec * binary_entropy(ge.e_mu))
        return ec, 0.0, 1.0, tuple(flags)
    e1 = e1_upper(p, q1, ge.e_nu, ge.q_nu, ge.y0)
    if e1 >= 0.5:
        flags.append("e1_at_or_above_half")
    raw = p.q * p.l_mu * (
        -ge.q_mu * p.f_ec * binary_entropy(ge.e_mu) + q1 * (1.0 - binary_entropy(e1))
    )
    return raw, q1, e1, tuple(flags)


def secure_rate(p: ProtocolParams, ch: ChannelParams) -> RatePoint:
    """Secure key rate point at the channel's loss.

    The rate clamps at zero when the bound goes negative (flagged
    "rate_clamped"); rate_per_second = R * rep_rate when R > 0, else 0.
    """
    ge = gains_and_errors(p, ch)
    raw, q1, e1, flags = _rate_per_pulse_raw(p, ge)
    rate = max(raw, 0.0)
    if raw < 0.0:
        flags = flags + ("rate_clamped",)
    return RatePoint(
        loss_db=ch.total_loss_db,
        q_mu=ge.q_mu,
        q_nu=ge.q_nu,
        e_mu=ge.e_mu,
        e_nu=ge.e_nu,
        y0=ge.y0,
        q1_lower=q1,
        e1_upper=e1,
        qber=ge.e_mu,
        rate_per_pulse=rate,
        rate_per_second=rate * ch.rep_rate if rate > 0 else 0.0,
        flags=flags,
    )


@dataclass(frozen=True)
class SweepResult:
    points: list[RatePoint]
    threshold_db: float
    threshold_is_grid_edge: bool = False


def sweep_loss(p: ProtocolParams, ch: ChannelParams, loss_grid) -> SweepResult:
    """Rate points over a monotone loss grid plus the positive-rate threshold.

    The threshold interpolates the unclamped per-pulse rate linearly
    between the last positive and first non-positive grid points.  If the
    rate is still positive at the end of the grid the last grid loss is
    returned as a lower bound (``threshold_is_grid_edge`` set).
    """
    grid = [float(x) for x in np.asarray(loss_grid, dtype=float).ravel()]
    if len(grid) == 0:
        raise ValueError("loss grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("loss grid must be strictly increasing")

    points: list[RatePoint] = []
    raws: list[float] = []
    for loss in grid:
        ge = gains_and_errors(p, replace(ch, total_loss_db=loss))
        raw, q1, e1, flags = _rate_per_pulse_raw(p, ge)
        rate = max(raw, 0.0)
        if raw < 0.0:
            flags = flags + ("rate_clamped",)
        points.append(
            RatePoint(
                loss_db=loss,
                q_mu=ge.q_mu,
                q_nu=ge.q_nu,
                e_mu=ge.e_mu,
                e_nu=ge.e_nu,
                y0=ge.y0,
                q1_lower=q1,
                e1_upper=e1,
                qber=ge.e_mu,
                rate_per_pulse=rate,
                rate_per_second=rate * ch.rep_rate if rate > 0 else 0.0,
                flags=flags,
            )
        )
        raws.append(raw)

    threshold = float("nan")  # stays NaN when no grid point is positive
    edge = False
    positive = [i for i, r in enumerate(raws) if r > 0.0]
    if positive:
        last = positive[-1]
        if last == len(grid) - 1:
            threshold = grid[-1]
            edge = True
        else:
            l1, l2 = grid[last], grid[last + 1]
            r1, r2 = raws[last], raws[last + 1]
            threshold = l1 + (l2 - l1) * r1 / (r1 - r2)
    return SweepResult(points=points, threshold_db=threshold, threshold_is_grid_edge=edge)
