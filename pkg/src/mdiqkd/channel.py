"""Fiber links, environmental drift of the photons' indistinguishability, and
the three feedback loops (polarization, arrival time, laser frequency) that
undo it.

Drift is a slow sinusoid driven by a latent temperature phase plus a bounded
random walk. Every transition takes an explicit seed; all state lives in
:class:`DriftState`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .optics import DistinguishabilityParams, mode_overlap


@dataclass(frozen=True)
class FiberLink:
    length: float  # km
    loss: float  # dB

    def __post_init__(self):
        if not self.length >= 0:
            raise ValueError(f"fiber length must be non-negative, got {self.length}")
        if not self.loss >= 0:
            raise ValueError(f"fiber loss must be non-negative, got {self.loss}")

    @property
    def transmittance(self) -> float:
        return transmittance(self)


def transmittance(link: FiberLink) -> float:
    return 10.0 ** (-link.loss / 10.0)


@dataclass(frozen=True)
class DriftState:
    time: float = 0.0  # s
    delta_t: float = 0.0  # ps
    pol_overlap: float = 1.0
    delta_nu: float = 0.0  # MHz
    temperature_phase: float = 0.0  # rad

    def __post_init__(self):
        if not 0.0 <= self.pol_overlap <= 1.0:
            raise ValueError("pol_overlap must lie in [0, 1]")


@dataclass(frozen=True)
class DriftParams:
    """Amplitudes of the drift model; walks are per square-root second."""

    temperature_period: float = 3600.0  # s
    timing_amplitude: float = 60.0  # ps
    timing_walk: float = 2.5  # ps / sqrt(s)
    timing_bound: float = 1000.0  # ps
    pol_amplitude: float = 0.15
    pol_walk: float = 0.004  # 1 / sqrt(s)
    freq_amplitude: float = 5.0  # MHz
    freq_walk: float = 0.15  # MHz / sqrt(s)
    freq_max_rate: float = 20.0  # MHz per hour

    def __post_init__(self):
        if self.temperature_period <= 0:
            raise ValueError("temperature_period must be positive")
        for name in ("timing_amplitude", "timing_walk", "timing_bound", "pol_amplitude",
                     "pol_walk", "freq_amplitude", "freq_walk", "freq_max_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def still(cls) -> "DriftParams":
        """No drift at all."""
        return cls(timing_amplitude=0.0, timing_walk=0.0, pol_amplitude=0.0, pol_walk=0.0,
                   freq_amplitude=0.0, freq_walk=0.0)


@dataclass(frozen=True)
class StabilizerConfig:
    enabled: bool = True
    pol_period: float = 10.0  # s
    pol_holdoff: float = 0.5  # s
    timing_period: float = 60.0  # s
    timing_residual_bound: float = 30.0  # ps
    freq_threshold: float = 10.0  # MHz
    freq_worstcase_period: float = 1800.0  # s

    def __post_init__(self):
        for name in ("pol_period", "pol_holdoff", "timing_period", "timing_residual_bound",
                     "freq_threshold", "freq_worstcase_period"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.pol_holdoff < self.pol_period:
            raise ValueError("pol_holdoff must be shorter than pol_period")

    @property
    def duty_fraction(self) -> float:
        """Fraction of wall-clock time left for data after polarization holdoffs."""
        return 1.0 - self.pol_holdoff / self.pol_period if self.enabled else 1.0


def _reflect_unit(x: float) -> float:
    # fold onto [0, 1] as a reflecting boundary
    x = math.fmod(abs(x), 2.0)
    return 2.0 - x if x > 1.0 else x


def _reflect_symmetric(x: float, bound: float) -> float:
    if bound <= 0:
        return 0.0
    if -bound <= x <= bound:
        return x
    return 2.0 * bound * _reflect_unit((x + bound) / (2.0 * bound)) - bound


def step_drift(state: DriftState, dt: float, params: DriftParams, rng_seed) -> DriftState:
    """Advance the drift by ``dt`` seconds."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    rng = np.random.default_rng(rng_seed)
    g_t, g_p, g_f = rng.standard_normal(3)
    theta0 = state.temperature_phase
    theta1 = theta0 + 2.0 * math.pi * dt / params.temperature_period
    ds = math.sin(theta1) - math.sin(theta0)
    root = math.sqrt(dt)

    delta_t = state.delta_t + params.timing_amplitude * ds + params.timing_walk * root * g_t
    delta_t = _reflect_symmetric(delta_t, params.timing_bound)

    pol = state.pol_overlap - params.pol_amplitude * ds + params.pol_walk * root * g_p
    pol = _reflect_unit(pol)

    cap = params.freq_max_rate * dt / 3600.0
    dnu = params.freq_amplitude * ds + params.freq_walk * root * g_f
    dnu = min(max(dnu, -cap), cap)

    return DriftState(state.time + dt, delta_t, pol, state.delta_nu + dnu,
                      math.fmod(theta1, 2.0 * math.pi))


def _crossed(t_prev: float, t: float, period: float) -> bool:
    return math.floor(t / period + 1e-12) > math.floor(t_prev / period + 1e-12)


def apply_stabilizers(state: DriftState, config: StabilizerConfig, previous_time: float | None = None,
                      rng_seed=None):
    """Apply any feedback corrections due in ``(previous_time, state.time]``.

    Polarization is reset to perfect overlap at every ``pol_period`` boundary,
    the arrival-time difference to a uniform residual within
    ``timing_residual_bound`` at every ``timing_period`` boundary, and the
    frequency difference to zero whenever it exceeds ``freq_threshold``.
    Returns ``(corrected_state, duty_fraction)``.
    """
    if not config.enabled:
        return state, 1.0
    t_prev = state.time if previous_time is None else previous_time
    out = state
    if _crossed(t_prev, state.time, config.pol_period):
        out = replace(out, pol_overlap=1.0)
    if _crossed(t_prev, state.time, config.timing_period):
        residual = np.random.default_rng(rng_seed).uniform(-1.0, 1.0) * config.timing_residual_bound
        out = replace(out, delta_t=float(residual))
    if abs(out.delta_nu) > config.freq_threshold:
        out = replace(out, delta_nu=0.0)
    return out, config.duty_fraction


def drift_overlap(state: DriftState, pulse_fwhm: float = 500.0) -> float:
    return mode_overlap(DistinguishabilityParams(state.delta_t, pulse_fwhm, state.pol_overlap,
                                                 state.delta_nu))


@dataclass(frozen=True)
class DriftTrace:
    time: np.ndarray
    delta_t: np.ndarray
    pol_overlap: np.ndarray
    delta_nu: np.ndarray
    overlap: np.ndarray
    timing_corrected: np.ndarray
    freq_corrected: np.ndarray
    duty_fraction: float

    def __len__(self):
        return len(self.time)


def simulate_drift(initial: DriftState, duration: float, dt: float, params: DriftParams,
                   stabilizer: StabilizerConfig | None = None, seed=0,
                   pulse_fwhm: float = 500.0) -> DriftTrace:
    """Run drift (and optionally feedback) for ``duration`` seconds in steps of ``dt``.

    The first sample is ``initial``. Flags mark samples taken right after a
    timing or frequency correction.
    """
    if not duration > 0 or not dt > 0:
        raise ValueError("duration and dt must be positive")
    n = int(math.ceil(duration / dt - 1e-9))
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = ss.generate_state(2 * n).reshape(n, 2)
    stab = stabilizer if stabilizer is not None else StabilizerConfig(enabled=False)
    rows = [initial]
    t_flags = [False]
    f_flags = [False]
    state = initial
    for k in range(n):
        stepped = step_drift(state, dt, params, int(seeds[k, 0]))
        corrected, _ = apply_stabilizers(stepped, stab, state.time, int(seeds[k, 1]))
        t_flags.append(stab.enabled and _crossed(state.time, stepped.time, stab.timing_period))
        f_flags.append(corrected.delta_nu != stepped.delta_nu)
        state = corrected
        rows.append(state)
    return DriftTrace(
        time=np.array([r.time for r in rows]),
        delta_t=np.array([r.delta_t for r in rows]),
        pol_overlap=np.array([r.pol_overlap for r in rows]),
        delta_nu=np.array([r.delta_nu for r in rows]),
        overlap=np.array([drift_overlap(r, pulse_fwhm) for r in rows]),
        timing_corrected=np.array(t_flags),
        freq_corrected=np.array(f_flags),
        duty_fraction=stab.duty_fraction,
    )
