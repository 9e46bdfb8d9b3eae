"""Event-level pulse-train simulator for the decoy-BB84 channel model.

Each pulse is realized explicitly: a class (signal/decoy/vacuum) drawn
from the allocation, a BB84 state drawn uniformly, a Poisson photon
number, independent per-photon survival at the channel transmittance,
independent dark fires on every receiver detector, a uniform receiver
basis, sifting on matched bases, and error draws (intrinsic QBER for
photon clicks, the vacuum error rate for dark-only clicks).  Multi
detector clicks resolve to a uniformly random bit and still count as
sifted; a dark count on the detector the photon already fired is the same
click, so a photon pulse double-clicks only when one of the other
``num_detectors - 1`` detectors dark-fires.

Pulses are processed in fixed-size chunks.  Chunk ``k`` consumes its own
counter-based random stream keyed by ``(seed, k)`` (Philox), and the tally
is the sum of per-chunk tallies, so the result is a pure function of
(config, seed, chunk size): any worker count or scheduling order produces
the byte-identical tally.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .decoy import ChannelParams, ProtocolParams, transmittance

PULSE_CLASSES = ("signal", "decoy", "vacuum")
STATES = ("H", "D", "V", "A")

DEFAULT_CHUNK = 1 << 20


@dataclass(frozen=True)
class SimConfig:
    """Pulse count, seed and chunking policy plus the physical parameters."""

    n_pulses: int
    seed: int
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    channel: ChannelParams = field(default_factory=ChannelParams)
    chunk_pulses: int = DEFAULT_CHUNK

    def __post_init__(self) -> None:
        if self.n_pulses <= 0:
            raise ValueError(f"n_pulses must be positive, got {self.n_pulses}")
        if self.chunk_pulses <= 0:
            raise ValueError(f"chunk_pulses must be positive, got {self.chunk_pulses}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass
class PulseTally:
    """Counts per (pulse class x BB84 state), plus click bookkeeping.

    Arrays are indexed [class, state] with the orders of ``PULSE_CLASSES``
    and ``STATES``.  Invariants: detected <= sent and
    errors <= sifted <= detected, elementwise.
    """

    sent: np.ndarray
    detected: np.ndarray
    sifted: np.ndarray
    errors: np.ndarray
    dark_only: int = 0
    double_click: int = 0

    @classmethod
    def zeros(cls) -> "PulseTally":
        shape = (len(PULSE_CLASSES), len(STATES))
        return cls(
            sent=np.zeros(shape, dtype=np.int64),
            detected=np.zeros(shape, dtype=np.int64),
            sifted=np.zeros(shape, dtype=np.int64),
            errors=np.zeros(shape, dtype=np.int64),
        )

    def __add__(self, other: "PulseTally") -> "PulseTally":
        return PulseTally(
            sent=self.sent + other.sent,
            detected=self.detected + other.detected,
            sifted=self.sifted + other.sifted,
            errors=self.errors + other.errors,
            dark_only=self.dark_only + other.dark_only,
            double_click=self.double_click + other.double_click,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PulseTally):
            return NotImplemented
        return (
            np.array_equal(self.sent, other.sent)
            and np.array_equal(self.detected, other.detected)
            and np.array_equal(self.sifted, other.sifted)
            and np.array_equal(self.errors, other.errors)
            and self.dark_only == other.dark_only
            and self.double_click == other.double_click
        )

    def class_totals(self, which: str) -> np.ndarray:
        """Per-class totals of one counter ("sent", "detected", ...)."""
        return getattr(self, which).sum(axis=1)

    def to_dict(self) -> dict:
        """Nested class -> state -> counters mapping plus click totals."""
        out: dict = {"dark_only": int(self.dark_only), "double_click": int(self.double_click)}
        for ci, cls_name in enumerate(PULSE_CLASSES):
            out[cls_name] = {
                state: {
                    "sent": int(self.sent[ci, si]),
                    "detected": int(self.detected[ci, si]),
                    "sifted": int(self.sifted[ci, si]),
                    "errors": int(self.errors[ci, si]),
                }
                for si, state in enumerate(STATES)
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "PulseTally":
        tally = cls.zeros()
        tally.dark_only = int(data["dark_only"])
        tally.double_click = int(data["double_click"])
        for ci, cls_name in enumerate(PULSE_CLASSES):
            for si, state in enumerate(STATES):
                cell = data[cls_name][state]
                tally.sent[ci, si] = cell["sent"]
                tally.detected[ci, si] = cell["detected"]
                tally.sifted[ci, si] = cell["sifted"]
                tally.errors[ci, si] = cell["errors"]
        return tally


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    """Counter-based substream for one chunk, keyed by (seed, chunk index)."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(chunk_index,)))
    )


# Below this per-pulse any-dark probability the dark fires are sampled
# sparsely (count of affected pulses first, then their positions); above it
# a per-pulse binomial is drawn directly.  Both sample the same law.
_SPARSE_DARK_LIMIT = 1e-4


def _binom_pmf(k: int, n: int, p: float) -> float:
    from math import comb

    return comb(n, k) * p**k * (1.0 - p) ** (n - k)


def _draw_darks(rng: np.random.Generator, n: int, n_det: int, dark_p: float) -> np.ndarray:
    """Per-pulse count of dark-firing detectors, iid Binomial(n_det, dark_p)."""
    dark_p = min(dark_p, 1.0)
    p_any = -np.expm1(n_det * np.log1p(-dark_p)) if dark_p < 1.0 else 1.0
    if p_any > _SPARSE_DARK_LIMIT:
        return rng.binomial(n_det, dark_p, size=n)
    n_dark = np.zeros(n, dtype=np.int16)
    hits = int(rng.binomial(n, p_any))
    if hits:
        where = rng.choice(n, size=hits, replace=False)
        # count conditioned on at least one fire
        pmf = np.array([_binom_pmf(k, n_det, dark_p) for k in range(1, n_det + 1)])
        n_dark[where] = 1 + rng.choice(n_det, size=hits, p=pmf / pmf.sum())
    return n_dark


def _simulate_chunk(cfg: SimConfig, chunk_index: int, n: int) -> PulseTally:
    """Simulate ``n`` pulses of chunk ``chunk_index`` and tally them."""
    p, ch = cfg.protocol, cfg.channel
    rng = _chunk_rng(cfg.seed, chunk_index)
    eta = transmittance(ch)
    dark_p = ch.dark_rate * ch.gate_window      # per detector, per pulse
    n_det = ch.num_detectors

    # pulse class from the allocation, BB84 state and receiver basis uniform
    u_class = rng.random(n)
    pulse_class = np.full(n, 2, dtype=np.uint8)          # vacuum
    pulse_class[u_class < p.p_signal + p.p_decoy] = 1    # decoy
    pulse_class[u_class < p.p_signal] = 0                # signal
    state_basis = rng.integers(0, 8, size=n, dtype=np.uint8)
    state = state_basis & 3
    # H=0, D=1, V=2, A=3: Alice's basis is state & 1; Bob's is the next bit
    basis_match = ((state_basis >> 2) & 1) == (state & 1)

    # photon numbers (vacuum sends none); each photon survives independently
    # with probability eta, so the pulse shows a photon click with
    # probability 1 - (1 - eta)^i, drawn directly
    photons = np.zeros(n, dtype=np.int16)
    signal_mask = pulse_class == 0
    decoy_mask = pulse_class == 1
    photons[signal_mask] = rng.poisson(p.mu, size=int(signal_mask.sum()))
    photons[decoy_mask] = rng.poisson(p.nu, size=int(decoy_mask.sum()))
    photon_click = np.zeros(n, dtype=bool)
    carrying = np.flatnonzero(photons > 0)
    if carrying.size:
        survive_none = np.power(1.0 - eta, photons[carrying].astype(np.float64))
        photon_click[carrying] = rng.random(carrying.size) >= survive_none

    # independent dark fires on each detector
    n_dark = _draw_darks(rng, n, n_det, dark_p)
    any_dark = n_dark > 0
    detected = photon_click | any_dark
    dark_only = any_dark & ~photon_click

    # a photon pulse double-clicks when a dark fires on another detector;
    # darks alone double-click when two or more detectors fire
    double = np.zeros(n, dtype=bool)
    both = np.flatnonzero(photon_click & any_dark)
    if both.size:
        other = n_dark[both] >= 2
        lone = np.flatnonzero(~other)
        if lone.size:
            # the lone dark landed on one of n_det detectors uniformly
            other[lone] = rng.random(lone.size) < (n_det - 1) / n_det
        double[both] = other
    double |= dark_only & (n_dark >= 2)

    sifted = detected & basis_match

    # error probability by click type: random bit on double clicks,
    # intrinsic QBER on photon clicks, vacuum error rate on dark-only
    sifted_idx = np.flatnonzero(sifted)
    errors = np.zeros(n, dtype=bool)
    if sifted_idx.size:
        err_p = np.where(
            double[sifted_idx],
            0.5,
            np.where(photon_click[sifted_idx], ch.intrinsic_qber, p.e0),
        )
        errors[sifted_idx] = rng.random(sifted_idx.size) < err_p

    # bincount over the 12 (class, state) cells
    code = (pulse_class << 2) | state
    n_cells = len(PULSE_CLASSES) * len(STATES)
    tally = PulseTally.zeros()
    tally.sent += np.bincount(code, minlength=n_cells).reshape(3, 4)
    tally.detected += np.bincount(code[detected], minlength=n_cells).reshape(3, 4)
    tally.sifted += np.bincount(code[sifted], minlength=n_cells).reshape(3, 4)
    tally.errors += np.bincount(code[errors], minlength=n_cells).reshape(3, 4)
    tally.dark_only = int(dark_only.sum())
    tally.double_click = int(double.sum())
    return tally


def _chunk_sizes(cfg: SimConfig) -> list[int]:
    full, rem = divmod(cfg.n_pulses, cfg.chunk_pulses)
    sizes = [cfg.chunk_pulses] * full
    if rem:
        sizes.append(rem)
    return sizes


def _run_chunk(args: tuple[SimConfig, int, int]) -> PulseTally:
    return _simulate_chunk(*args)


def simulate(cfg: SimConfig, workers: int = 1, progress=None) -> PulseTally:
    """Simulate the full pulse train and return the merged tally.

    ``workers`` only distributes chunks over processes; the chunk-to-stream
    mapping is fixed, and tally merging is an elementwise integer sum
    (associative and commutative), so the result is identical for any
    worker count.  ``progress``, if given, is called with (pulses_done,
    pulses_total) after every chunk.
    """
    sizes = _chunk_sizes(cfg)
    tasks = [(cfg, idx, size) for idx, size in enumerate(sizes)]
    total = cfg.n_pulses
    done = 0
    result = PulseTally.zeros()
    if workers <= 1 or len(tasks) == 1:
        for task in tasks:
            result = result + _run_chunk(task)
            done += task[2]
            if progress is not None:
                progress(done, total)
        return result
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for idx, tally in enumerate(pool.map(_run_chunk, tasks)):
            result = result + tally
            done += tasks[idx][2]
            if progress is not None:
                progress(done, total)
    return result


@dataclass(frozen=True)
class RateEstimate:
    """A tally ratio with its binomial standard error."""

    value: float
    stderr: float
    numerator: int
    denominator: int


@dataclass(frozen=True)
class EmpiricalRates:
    """Empirical gains, error rates and vacuum yield from one tally."""

    q_mu: RateEstimate
    q_nu: RateEstimate
    e_mu: RateEstimate
    e_nu: RateEstimate
    y0: RateEstimate
    sifted_rate: RateEstimate
    flags: tuple[str, ...] = ()


MIN_EVENTS = 100


def _ratio(num: int, den: int) -> RateEstimate:
    if den <= 0:
        return RateEstimate(value=float("nan"), stderr=float("nan"), numerator=num, denominator=den)
    value = num / den
    stderr = float(np.sqrt(max(value * (1.0 - value), 0.0) / den))
    return RateEstimate(value=value, stderr=stderr, numerator=num, denominator=den)


def estimate(tally: PulseTally, cfg: SimConfig) -> EmpiricalRates:
    """Empirical Q_mu, Q_nu, E_mu, E_nu, Y0 and sifted rate with standard errors.

    Gains divide detections by pulses sent per class; error rates divide
    errors by sifted counts; Y0 comes from the vacuum class.  Estimates
    whose denominator holds fewer than 100 events are flagged, not failed.
    """
    sent = tally.class_totals("sent")
    detected = tally.class_totals("detected")
    sifted = tally.class_totals("sifted")
    errors = tally.class_totals("errors")

    q_mu = _ratio(int(detected[0]), int(sent[0]))
    q_nu = _ratio(int(detected[1]), int(sent[1]))
    e_mu = _ratio(int(errors[0]), int(sifted[0]))
    e_nu = _ratio(int(errors[1]), int(sifted[1]))
    y0 = _ratio(int(detected[2]), int(sent[2]))
    sifted_rate = _ratio(int(sifted.sum()), int(sent.sum()))

    flags = tuple(
        f"low_statistics:{name}"
        for name, est in (
            ("q_mu", q_mu),
            ("q_nu", q_nu),
            ("e_mu", e_mu),
            ("e_nu", e_nu),
            ("y0", y0),
            ("sifted_rate", sifted_rate),
        )
        if est.denominator < MIN_EVENTS
    )
    return EmpiricalRates(
        q_mu=q_mu, q_nu=q_nu, e_mu=e_mu, e_nu=e_nu, y0=y0, sifted_rate=sifted_rate, flags=flags
    )
