"""Sampling oracles used to cross-check the analytic optics model.

Both oracles work at the level of detected photons rather than click
probabilities, and share no arithmetic with :mod:`mdiqkd.optics` beyond the
pulse amplitudes.

* :func:`sample_psi_minus` draws a random relative phase per gate, Poisson
  photon counts for every (detector, slot) and independent dark clicks.
* :func:`fock_oracle` works for perfectly distinguishable photons
  (overlap 0), where every photon is routed independently. It draws the
  photon number each party sends, so events can be tagged by photon-number
  sector, for instance the single-photon pairs that the decoy bounds
  estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .optics import DetectorModel, TimeBinPulsePair, encode_qubit, psi_minus_mask

DEFAULT_CHUNK = 1_000_000


@dataclass(frozen=True)
class Estimate:
    """A sampled probability and its binomial standard error."""

    value: float
    stderr: float
    successes: int
    trials: int

    @classmethod
    def from_counts(cls, k: int, n: int) -> "Estimate":
        p = k / n
        return cls(p, math.sqrt(max(p * (1.0 - p), 0.0) / n), int(k), int(n))

    def agrees_with(self, x: float, n_sigma: float = 3.0) -> bool:
        # a zero-count estimate has zero standard error; allow one count of slack
        return abs(self.value - x) <= n_sigma * max(self.stderr, 1.0 / self.trials)


def _chunks(n: int, chunk: int):
    while n > 0:
        m = min(n, chunk)
        yield m
        n -= m


def _detector_intensities(a, b, overlap: float, phi):
    """Mean photon numbers (gate, detector, slot) for amplitudes a, b and phases phi."""
    rot = np.exp(1j * phi)[:, None] * b[None, :]
    plus = np.abs(a[None, :] + overlap * rot) ** 2 / 2.0
    minus = np.abs(a[None, :] - overlap * rot) ** 2 / 2.0
    orth = (1.0 - overlap**2) * np.abs(b) ** 2 / 2.0
    return np.stack([plus + orth, minus + orth], axis=1)


def _clicks(rng, mean_detected, dark: float):
    photons = rng.poisson(mean_detected) > 0
    if dark > 0:
        photons |= rng.random(mean_detected.shape) < dark
    return photons


def sample_psi_minus(alice: TimeBinPulsePair, bob: TimeBinPulsePair, overlap: float, det: DetectorModel,
                     link_transmittances=(1.0, 1.0), n_samples: int = 10**7, seed=0,
                     chunk: int = DEFAULT_CHUNK) -> Estimate:
    """Monte-Carlo estimate of the psi- probability per gate."""
    rng = np.random.default_rng(seed)
    a = alice.amplitudes * math.sqrt(link_transmittances[0])
    b = bob.amplitudes * math.sqrt(link_transmittances[1])
    hits = 0
    for m in _chunks(int(n_samples), chunk):
        phi = rng.uniform(0.0, 2.0 * math.pi, m)
        nbar = det.efficiency * _detector_intensities(a, b, overlap, phi)
        hits += int(np.count_nonzero(psi_minus_mask(_clicks(rng, nbar, det.dark_count_prob))))
    return Estimate.from_counts(hits, int(n_samples))


@dataclass(frozen=True)
class VisibilityEstimate:
    value: float
    stderr: float
    matched: Estimate
    distinguishable: Estimate


def _sample_coincidence(mu, overlap, det, n, rng, chunk):
    pulse = encode_qubit("z", 0, mu).amplitudes
    hits = 0
    for m in _chunks(n, chunk):
        phi = rng.uniform(0.0, 2.0 * math.pi, m)
        clicks = _clicks(rng, det.efficiency * _detector_intensities(pulse, pulse, overlap, phi),
                         det.dark_count_prob)
        hits += int(np.count_nonzero(clicks[:, 0, 0] & clicks[:, 1, 0]))
    return Estimate.from_counts(hits, n)


def sample_hom_visibility(mu: float, overlap: float, det: DetectorModel, n_samples: int = 10**7, seed=0,
                          chunk: int = DEFAULT_CHUNK) -> VisibilityEstimate:
    """Sampled HOM visibility ``1 - C(overlap) / C(0)`` with a delta-method error."""
    rng = np.random.default_rng(seed)
    c_match = _sample_coincidence(mu, overlap, det, int(n_samples), rng, chunk)
    c_dist = _sample_coincidence(mu, 0.0, det, int(n_samples), rng, chunk)
    if c_dist.successes == 0:
        raise ValueError("no distinguishable-photon coincidences sampled; increase n_samples")
    r = c_match.value / c_dist.value
    rel_match = c_match.stderr / c_match.value if c_match.value > 0 else 1.0 / n_samples
    rel = math.sqrt(rel_match**2 + (c_dist.stderr / c_dist.value) ** 2)
    return VisibilityEstimate(1.0 - r, r * rel, c_match, c_dist)


@dataclass(frozen=True)
class FockTally:
    """Counts from the Fock-level oracle for one basis."""

    gates: int
    psi_minus: int
    errors: int
    tagged_gates: int
    tagged_psi_minus: int
    tagged_errors: int

    @property
    def gain(self) -> Estimate:
        return Estimate.from_counts(self.psi_minus, self.gates)

    @property
    def tagged_yield(self) -> Estimate:
        """psi- probability given the tagged photon numbers were sent."""
        return Estimate.from_counts(self.tagged_psi_minus, self.tagged_gates)

    @property
    def tagged_error(self) -> Estimate:
        return Estimate.from_counts(self.tagged_errors, max(self.tagged_psi_minus, 1))


def _routing(pulse: TimeBinPulsePair, detected: float):
    """Per-photon probabilities of landing in (det0 early, det0 late, det1 early, det1 late, lost)."""
    slot = np.abs(pulse.amplitudes) ** 2
    slot = slot / slot.sum() if slot.sum() > 0 else np.array([0.5, 0.5])
    cells = np.concatenate([slot, slot]) * detected / 2.0
    return np.append(cells, max(0.0, 1.0 - cells.sum()))


def fock_oracle(basis, mu_alice: float, mu_bob: float, det: DetectorModel, link_transmittances=(1.0, 1.0),
                n_gates: int = 10**6, seed=0, tag=(1, 1), fixed_photons=None,
                chunk: int = DEFAULT_CHUNK) -> FockTally:
    """Photon-level simulation of distinguishable (overlap 0) pulses for one basis.

    Each gate draws a uniformly random state pair and Poissonian photon
    numbers; every photon is detected with probability ``efficiency *
    transmittance`` and lands on either detector with equal probability, in
    the time slot given by its pulse. Dark clicks are added independently.
    Gates whose photon numbers equal ``tag`` are tallied separately.
    ``fixed_photons=(n_a, n_b)`` skips the Poisson draw and sends exactly
    those numbers, which samples one sector directly.
    """
    rng = np.random.default_rng(seed)
    pulses = {(p, bit): encode_qubit(basis, bit, mu_alice if p == 0 else mu_bob) for p in (0, 1) for bit in (0, 1)}
    routes = {k: _routing(v, det.efficiency * link_transmittances[k[0]]) for k, v in pulses.items()}
    totals = np.zeros(6, dtype=np.int64)
    for m in _chunks(int(n_gates), chunk):
        bits = rng.integers(0, 2, size=(m, 2))
        if fixed_photons is None:
            n_a = rng.poisson(mu_alice, m)
            n_b = rng.poisson(mu_bob, m)
        else:
            n_a = np.full(m, fixed_photons[0])
            n_b = np.full(m, fixed_photons[1])
        counts = np.zeros((m, 4), dtype=np.int64)
        for party, n in ((0, n_a), (1, n_b)):
            for bit in (0, 1):
                sel = bits[:, party] == bit
                if np.any(sel):
                    counts[sel] += rng.multinomial(n[sel], routes[(party, bit)])[:, :4]
        clicks = (counts > 0).reshape(m, 2, 2)
        if det.dark_count_prob > 0:
            clicks |= rng.random((m, 2, 2)) < det.dark_count_prob
        psi = psi_minus_mask(clicks)
        err = psi & (bits[:, 0] == bits[:, 1])
        tagged = (n_a == tag[0]) & (n_b == tag[1])
        totals += [m, psi.sum(), err.sum(), tagged.sum(), (psi & tagged).sum(), (err & tagged).sum()]
    return FockTally(*(int(x) for x in totals))
