"""MDI-QKD measurement campaigns: classification, sifting and counting."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import DriftParams, DriftState, FiberLink, StabilizerConfig, simulate_drift
from .optics import (BSMOutcome, DetectorModel, Projection, attenuate, beamsplitter_transform,
                     click_probabilities, encode_qubit, gain_and_error, phase_quadrature,
                     psi_minus_probability)
from .tables import (ALL_CELLS, BASES, INTENSITY_LABELS, UNDEFINED, ConfigurationError, GainErrorRecord,
                     GainErrorTable, IntensitySet, normalize_basis)


class SiftResult(str, enum.Enum):
    KEY_MATCH = "match"
    KEY_ERROR = "error"
    DISCARD = "discard"


def classify_outcome(outcome: BSMOutcome) -> Projection:
    return outcome.classification


def sift_and_flip(alice_bit: int, bob_bit: int, alice_basis, bob_basis, classification) -> SiftResult:
    """Keep psi- events with matching bases; Bob flips his bit before comparison."""
    if classification != Projection.PSI_MINUS:
        return SiftResult.DISCARD
    if normalize_basis(alice_basis) != normalize_basis(bob_basis):
        return SiftResult.DISCARD
    return SiftResult.KEY_MATCH if alice_bit == 1 - bob_bit else SiftResult.KEY_ERROR


@dataclass(frozen=True)
class CellCounts:
    gates_sent: int
    psi_minus: int
    errors: int

    def __post_init__(self):
        if not 0 <= self.errors <= self.psi_minus <= self.gates_sent:
            raise ValueError("counts must satisfy 0 <= errors <= psi_minus <= gates_sent")


def estimate_gain_error(counts: CellCounts) -> GainErrorRecord:
    """Gain and error rate from raw counts, with Poissonian uncertainties.

    The error-rate sigma treats the error and projection counts as
    independent Poisson variables. With zero errors it falls back to one
    count over the number of projections.
    """
    if counts.gates_sent < 1:
        raise ValueError("gates_sent must be at least 1")
    n, k, m = counts.gates_sent, counts.psi_minus, counts.errors
    q = k / n
    sigma_q = math.sqrt(k) / n
    if k == 0:
        return GainErrorRecord(q, UNDEFINED, sigma_q, UNDEFINED)
    e = m / k
    sigma_e = e * math.sqrt(1.0 / m + 1.0 / k) if m > 0 else 1.0 / k
    return GainErrorRecord(q, e, sigma_q, sigma_e)


@dataclass(frozen=True)
class SetupConfig:
    """One experimental configuration: links, intensities, detectors and environment."""

    name: str
    link_alice: FiberLink
    link_bob: FiberLink
    intensities: IntensitySet
    detector: DetectorModel = field(default_factory=DetectorModel)
    drift: DriftParams = field(default_factory=DriftParams)
    initial_drift: DriftState = field(default_factory=DriftState)
    stabilizer: StabilizerConfig = field(default_factory=StabilizerConfig)
    f_ec: float = 1.14
    seed: int = 0
    pulse_fwhm: float = 500.0  # ps
    extinction: float = 0.0
    cell_duration: float = 600.0  # s of data collection per cell
    dataset: str = ""  # setup label in a measurement file

    def __post_init__(self):
        if not self.name:
            raise ConfigurationError("setup name must not be empty")
        if self.f_ec < 1.0:
            raise ConfigurationError("f_ec must be >= 1")
        if self.cell_duration <= 0:
            raise ConfigurationError("cell_duration must be positive")

    @property
    def transmittances(self):
        return (self.link_alice.transmittance, self.link_bob.transmittance)

    @property
    def total_loss(self) -> float:
        return self.link_alice.loss + self.link_bob.loss

    @property
    def total_length(self) -> float:
        return self.link_alice.length + self.link_bob.length

    def default_gates_per_cell(self) -> int:
        return int(self.cell_duration * self.detector.gate_rate * self.stabilizer.duty_fraction)


@dataclass(frozen=True)
class CampaignResult:
    table: GainErrorTable
    counts: dict
    wall_clock: dict  # seconds of wall-clock time spent per cell
    dead_time_factor: dict  # fraction of gates not blocked by detector dead time
    duty_fraction: float

    @property
    def total_wall_clock(self) -> float:
        return float(sum(self.wall_clock.values()))


def _state_pairs(basis, mu_a, mu_b, extinction):
    for bit_a in (0, 1):
        for bit_b in (0, 1):
            yield (bit_a == bit_b,
                   encode_qubit(basis, bit_a, mu_a, extinction=extinction),
                   encode_qubit(basis, bit_b, mu_b, extinction=extinction))


def _mean_click_probability(pairs, overlap, det, transmittances):
    # average per-detector click probability per gate, for the dead-time model
    phi, w = phase_quadrature()
    total = 0.0
    for _, a, b in pairs:
        p = click_probabilities(beamsplitter_transform(
            attenuate(a, transmittances[0]), attenuate(b, transmittances[1]), overlap, phi), det)
        per_det = 1.0 - np.prod(1.0 - p, axis=-1)  # (phi, detector)
        total += float(np.dot(w, per_det.mean(axis=-1)))
    return total / len(pairs)


def run_campaign(setup: SetupConfig, gates_per_cell: int | None = None, seed=None,
                 drift_step: float = 1.0) -> CampaignResult:
    """Simulate all 2 x 9 cells of a decoy-state campaign.

    Within a cell, gates are grouped into drift steps of ``drift_step``
    seconds of wall-clock time. In each step the overlap comes from the drift
    trace, the four state pairs are drawn uniformly (multinomial), and
    psi- events are drawn from the analytic per-gate probability (binomial,
    i.e. independent Bernoulli gates). Whether a psi- event is a key error is
    fixed by the state pair. Duty cycle and dead time only enter the reported
    wall-clock figures.
    """
    gates = setup.default_gates_per_cell() if gates_per_cell is None else int(gates_per_cell)
    if gates < 1:
        raise ConfigurationError("gates_per_cell must be >= 1")
    seed = setup.seed if seed is None else seed
    det = setup.detector
    trans = setup.transmittances
    duty = setup.stabilizer.duty_fraction
    rate = det.gate_rate * duty
    children = np.random.SeedSequence(seed).spawn(len(ALL_CELLS))

    counts, records, wall, dead = {}, {}, {}, {}
    for cell, child in zip(ALL_CELLS, children):
        basis, la, lb = cell
        drift_seed, sample_seed = child.spawn(2)
        rng = np.random.default_rng(sample_seed)
        duration = gates / rate
        trace = simulate_drift(setup.initial_drift, max(duration, drift_step), drift_step, setup.drift,
                               setup.stabilizer, drift_seed, setup.pulse_fwhm)
        n_steps = max(1, int(math.ceil(duration / drift_step - 1e-9)))
        per_step = np.full(n_steps, gates // n_steps, dtype=np.int64)
        per_step[: gates % n_steps] += 1
        pairs = list(_state_pairs(basis, setup.intensities.value(la), setup.intensities.value(lb),
                                  setup.extinction))
        cache = {}
        psi = err = 0
        for k in range(n_steps):
            zeta = float(min(1.0, max(0.0, trace.overlap[k])))
            probs = cache.get(zeta)
            if probs is None:
                probs = [psi_minus_probability(a, b, zeta, det, trans) for _, a, b in pairs]
                cache[zeta] = probs
            alloc = rng.multinomial(per_step[k], [0.25] * 4)
            hits = rng.binomial(alloc, probs)
            psi += int(hits.sum())
            err += int(sum(h for h, (is_err, _, _) in zip(hits, pairs) if is_err))
        cc = CellCounts(gates, psi, err)
        counts[cell] = cc
        records[cell] = estimate_gain_error(cc)
        p_click = _mean_click_probability(pairs, float(np.mean(trace.overlap[:n_steps])), det, trans)
        dead_gates = det.dead_time * 1e-6 * det.gate_rate
        dead[cell] = 1.0 / (1.0 + p_click * dead_gates)
        wall[cell] = duration / dead[cell]

    table = GainErrorTable(setup.intensities, records, setup.name)
    return CampaignResult(table, counts, wall, dead, duty)


def expected_table(intensities: IntensitySet, overlap: float, det: DetectorModel, transmittances=(1.0, 1.0),
                   extinction: float = 0.0, name: str = "expected") -> GainErrorTable:
    """The infinite-statistics table of a fixed-overlap campaign (all sigmas zero)."""
    records = {}
    for basis, la, lb in ALL_CELLS:
        q, e = gain_and_error(basis, intensities.value(la), intensities.value(lb), overlap, det,
                              transmittances, extinction)
        records[(basis, la, lb)] = GainErrorRecord(q, e)
    return GainErrorTable(intensities, records, name)
