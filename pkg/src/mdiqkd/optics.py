"""Phase-averaged coherent-state model of the time-bin Bell-state measurement.

Each party sends a weak coherent pulse split over an early and a late time
bin. At the 50/50 beamsplitter Bob's field is decomposed into a part that is
mode-matched with Alice's (amplitude scaled by the field overlap) and an
orthogonal remainder that does not interfere. For a fixed relative optical
phase every detector/time-slot mode then holds a coherent state, so threshold
clicks are independent; averaging over the relative phase gives the
phase-randomized statistics.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .tables import UNDEFINED, ConfigurationError, normalize_basis

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
DEFAULT_QUADRATURE_NODES = 64
MIN_QUADRATURE_NODES = 8


class Basis(str, enum.Enum):
    Z = "z"
    X = "x"


class Projection(str, enum.Enum):
    PSI_MINUS = "psi_minus"
    DISCARD = "discard"


@dataclass(frozen=True)
class TimeBinPulsePair:
    """A prepared time-bin qubit: complex amplitudes of the early and late bins."""

    basis: str
    bit: int
    mean_photon_number: float
    global_phase: float
    amplitudes: np.ndarray = field(repr=False, compare=False)

    @property
    def early(self) -> complex:
        return complex(self.amplitudes[0])

    @property
    def late(self) -> complex:
        return complex(self.amplitudes[1])


@dataclass(frozen=True)
class DistinguishabilityParams:
    time_offset: float = 0.0  # ps
    pulse_fwhm: float = 500.0  # ps
    polarization_overlap: float = 1.0
    frequency_detuning: float = 0.0  # MHz

    def __post_init__(self):
        if not self.pulse_fwhm > 0:
            raise ValueError("pulse_fwhm must be positive")
        if not 0.0 <= self.polarization_overlap <= 1.0:
            raise ValueError("polarization_overlap must lie in [0, 1]")


@dataclass(frozen=True)
class DetectorModel:
    """Gated threshold detector pair at the Bell-state analyser."""

    efficiency: float = 0.1477
    dark_count_prob: float = 1.884e-5  # per gate and time slot
    dead_time: float = 10.0  # us
    gate_rate: float = 2e6  # Hz
    coincidence_separation: float = 1.4  # ns
    coincidence_tolerance: float = 0.4  # ns

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must lie in [0, 1]")
        if not 0.0 <= self.dark_count_prob < 1.0:
            raise ValueError("dark_count_prob must lie in [0, 1)")
        if self.dead_time < 0:
            raise ValueError("dead_time must be non-negative")
        if self.gate_rate <= 0:
            raise ValueError("gate_rate must be positive")

    def accepts_delay(self, delay_ns: float) -> bool:
        """Whether two clicks ``delay_ns`` apart count as a psi- coincidence."""
        return abs(abs(delay_ns) - self.coincidence_separation) <= self.coincidence_tolerance


@dataclass(frozen=True)
class BSMOutcome:
    """Clicks of detector {1, 2} (rows) in the {early, late} slots (columns)."""

    clicks: tuple

    def __post_init__(self):
        arr = np.asarray(self.clicks, dtype=bool)
        if arr.shape != (2, 2):
            raise ValueError("clicks must be a 2x2 matrix")
        object.__setattr__(self, "clicks", tuple(map(tuple, arr.tolist())))

    @property
    def classification(self) -> Projection:
        return Projection.PSI_MINUS if bool(psi_minus_mask(np.asarray(self.clicks))) else Projection.DISCARD


def psi_minus_mask(clicks):
    """Boolean psi- indicator for click arrays of shape (..., 2, 2).

    True exactly when one detector fires early, the other fires late and
    nothing else clicks.
    """
    c = np.asarray(clicks, dtype=bool)
    e1, l1, e2, l2 = c[..., 0, 0], c[..., 0, 1], c[..., 1, 0], c[..., 1, 1]
    return (e1 & l2 & ~l1 & ~e2) | (e2 & l1 & ~e1 & ~l2)


def encode_qubit(basis, bit: int, mean_photon_number: float, global_phase: float = 0.0,
                 extinction: float = 0.0) -> TimeBinPulsePair:
    """Prepare |0>, |1> (z) or |->, |+> (x) as early/late coherent amplitudes.

    ``extinction`` leaks that fraction of a z-state's intensity into the
    wrong time bin; it models imperfect intensity modulation and is zero for
    ideal states.
    """
    b = normalize_basis(basis)
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    if not mean_photon_number >= 0:
        raise ValueError(f"mean photon number must be non-negative, got {mean_photon_number}")
    if not 0.0 <= extinction <= 0.5:
        raise ValueError("extinction must lie in [0, 0.5]")
    mu = float(mean_photon_number)
    if b == "z":
        main, leak = math.sqrt(mu * (1.0 - extinction)), math.sqrt(mu * extinction)
        amps = np.array([main, leak] if bit == 0 else [leak, main], dtype=complex)
    else:
        half = math.sqrt(mu / 2.0)
        amps = np.array([half, half if bit == 1 else -half], dtype=complex)
    amps *= np.exp(1j * global_phase)
    return TimeBinPulsePair(b, bit, mu, float(global_phase) % (2 * math.pi), amps)


def mode_overlap(params: DistinguishabilityParams) -> float:
    """Field overlap of Alice's and Bob's modes at the beamsplitter.

    Gaussian pulses of the given FWHM offset in time and detuned in
    frequency, multiplied by the polarization overlap.
    """
    sigma_t = params.pulse_fwhm * FWHM_TO_SIGMA * 1e-12
    dt = params.time_offset * 1e-12
    dnu = params.frequency_detuning * 1e6
    temporal = math.exp(-dt * dt / (8.0 * sigma_t * sigma_t))
    spectral = math.exp(-2.0 * math.pi**2 * dnu * dnu * sigma_t * sigma_t)
    return params.polarization_overlap * temporal * spectral


def _check_overlap(overlap):
    if not 0.0 <= overlap <= 1.0:
        raise ValueError(f"overlap must lie in [0, 1], got {overlap}")


def beamsplitter_transform(alice: TimeBinPulsePair, bob: TimeBinPulsePair, overlap: float,
                           relative_phase=0.0) -> np.ndarray:
    """Output amplitudes of the 50/50 beamsplitter.

    Returns a complex array of shape ``phi.shape + (2, 2, 2)`` indexed by
    (detector, time slot, component) where component 0 is the mode shared
    with Alice and component 1 is Bob's orthogonal remainder.
    """
    _check_overlap(overlap)
    phi = np.asarray(relative_phase, dtype=float)
    a = alice.amplitudes
    b = np.multiply.outer(np.exp(1j * phi), bob.amplitudes)  # (..., 2 slots)
    par = overlap * b
    orth = math.sqrt(max(0.0, 1.0 - overlap * overlap)) * b
    s = 1.0 / math.sqrt(2.0)
    out = np.empty(phi.shape + (2, 2, 2), dtype=complex)
    out[..., 0, :, 0] = s * (a + par)
    out[..., 1, :, 0] = s * (a - par)
    out[..., 0, :, 1] = s * orth
    out[..., 1, :, 1] = -s * orth
    return out


def click_probabilities(amplitudes, det: DetectorModel) -> np.ndarray:
    """Per-gate click probability for each (detector, slot) of the output amplitudes."""
    nbar = np.sum(np.abs(amplitudes) ** 2, axis=-1)
    return 1.0 - (1.0 - det.dark_count_prob) * np.exp(-det.efficiency * nbar)


def psi_minus_from_clicks(p) -> np.ndarray:
    """Probability of the psi- pattern given independent click probabilities (..., 2, 2)."""
    e1, l1, e2, l2 = p[..., 0, 0], p[..., 0, 1], p[..., 1, 0], p[..., 1, 1]
    return e1 * l2 * (1 - l1) * (1 - e2) + e2 * l1 * (1 - e1) * (1 - l2)


@lru_cache(maxsize=16)
def phase_quadrature(nodes: int = DEFAULT_QUADRATURE_NODES):
    """Gauss-Legendre nodes on [0, 2pi) with weights normalised to a uniform average."""
    if nodes < MIN_QUADRATURE_NODES:
        raise ConfigurationError(f"quadrature needs at least {MIN_QUADRATURE_NODES} nodes, got {nodes}")
    x, w = np.polynomial.legendre.leggauss(nodes)
    phi = np.pi * (x + 1.0)
    phi.flags.writeable = False
    w = w / 2.0
    w.flags.writeable = False
    return phi, w


def attenuate(pulse: TimeBinPulsePair, t: float) -> TimeBinPulsePair:
    """The pulse after a channel of transmittance ``t``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"transmittance must lie in [0, 1], got {t}")
    return TimeBinPulsePair(pulse.basis, pulse.bit, pulse.mean_photon_number * t,
                            pulse.global_phase, pulse.amplitudes * math.sqrt(t))


def psi_minus_probability(alice: TimeBinPulsePair, bob: TimeBinPulsePair, overlap: float,
                          det: DetectorModel, link_transmittances=(1.0, 1.0),
                          nodes: int = DEFAULT_QUADRATURE_NODES) -> float:
    """Probability per gate of a psi- announcement, averaged over the relative phase."""
    phi, w = phase_quadrature(nodes)
    _check_overlap(overlap)
    a = attenuate(alice, link_transmittances[0])
    b = attenuate(bob, link_transmittances[1])
    p = click_probabilities(beamsplitter_transform(a, b, overlap, phi), det)
    return float(np.clip(np.dot(w, psi_minus_from_clicks(p)), 0.0, 1.0))


def gain_and_error(basis, mu_alice: float, mu_bob: float, overlap: float, det: DetectorModel,
                   link_transmittances=(1.0, 1.0), extinction: float = 0.0,
                   nodes: int = DEFAULT_QUADRATURE_NODES):
    """Gain Q and error rate e for one basis, averaged over the four state pairs.

    A psi- event is an error when the bits disagree after Bob's flip, i.e.
    when Alice and Bob prepared the same bit. ``e`` is ``UNDEFINED`` when Q is 0.
    """
    total = 0.0
    wrong = 0.0
    for bit_a in (0, 1):
        for bit_b in (0, 1):
            pa = encode_qubit(basis, bit_a, mu_alice, extinction=extinction)
            pb = encode_qubit(basis, bit_b, mu_bob, extinction=extinction)
            p = psi_minus_probability(pa, pb, overlap, det, link_transmittances, nodes)
            total += p
            if bit_a == bit_b:
                wrong += p
    q = total / 4.0
    e = wrong / total if total > 0 else UNDEFINED
    return q, e


def hom_coincidence(mu: float, overlap: float, det: DetectorModel,
                    nodes: int = DEFAULT_QUADRATURE_NODES) -> float:
    """Probability that both detectors click in the same slot for identical pulses."""
    phi, w = phase_quadrature(nodes)
    pulse = encode_qubit("z", 0, mu)
    p = click_probabilities(beamsplitter_transform(pulse, pulse, overlap, phi), det)
    return float(np.dot(w, p[..., 0, 0] * p[..., 1, 0]))


def hom_visibility(mu: float, overlap: float, det: DetectorModel,
                   nodes: int = DEFAULT_QUADRATURE_NODES) -> float:
    """HOM dip visibility relative to the fully distinguishable baseline."""
    if not mu > 0:
        raise ValueError("hom_visibility needs mu > 0")
    _check_overlap(overlap)
    c_dist = hom_coincidence(mu, 0.0, det, nodes)
    if c_dist <= 0:
        return UNDEFINED
    return (c_dist - hom_coincidence(mu, overlap, det, nodes)) / c_dist
