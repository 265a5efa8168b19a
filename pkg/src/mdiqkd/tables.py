"""Intensity sets, per-cell gain/error records and the full gain/error table."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

# Marker for quantities that have no value (an error rate measured on zero
# projections, a visibility with no baseline coincidences, ...).
UNDEFINED = math.nan

BASES = ("z", "x")
INTENSITY_LABELS = ("s", "d", "v")
ALL_CELLS = tuple((b, a, c) for b in BASES for a in INTENSITY_LABELS for c in INTENSITY_LABELS)


class ConfigurationError(ValueError):
    """Invalid configuration or parameter combination."""


class MissingCellError(KeyError):
    """A gain/error table lacks cells needed by an analysis."""

    def __init__(self, cells):
        self.cells = tuple(cells)
        listing = ", ".join(f"({b}, {a}{c})" for b, a, c in self.cells)
        super().__init__(f"missing or undefined cells: {listing}")

    def __str__(self):
        return self.args[0]


def is_undefined(value) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))


def normalize_basis(basis) -> str:
    b = getattr(basis, "value", basis)
    b = str(b).lower()
    if b not in BASES:
        raise ValueError(f"unknown basis {basis!r}; expected one of {BASES}")
    return b


@dataclass(frozen=True)
class IntensitySet:
    """Mean photon numbers for the signal, decoy and vacuum settings."""

    mu_signal: float
    mu_decoy: float = 0.05
    mu_vacuum: float = 0.0
    sigma_mu_signal: float = 0.0
    sigma_mu_decoy: float = 0.0

    def __post_init__(self):
        if self.mu_vacuum != 0.0:
            raise ConfigurationError("mu_vacuum is fixed to 0")
        if not (self.mu_signal > self.mu_decoy > self.mu_vacuum):
            raise ConfigurationError(
                "intensities must satisfy mu_signal > mu_decoy > mu_vacuum = 0, "
                f"got mu_signal={self.mu_signal}, mu_decoy={self.mu_decoy}"
            )

    def value(self, label: str) -> float:
        return {"s": self.mu_signal, "d": self.mu_decoy, "v": self.mu_vacuum}[label]


@dataclass(frozen=True)
class GainErrorRecord:
    """Gain per gate, error rate and their one-sigma uncertainties."""

    Q: float
    e: float
    sigma_Q: float = 0.0
    sigma_e: float = 0.0

    def __post_init__(self):
        if not self.Q >= 0:
            raise ValueError(f"gain must be non-negative, got {self.Q}")
        if not is_undefined(self.e) and not 0.0 <= self.e <= 1.0:
            raise ValueError(f"error rate must lie in [0, 1], got {self.e}")
        if self.sigma_Q < 0 or (not is_undefined(self.sigma_e) and self.sigma_e < 0):
            raise ValueError("uncertainties must be non-negative")


@dataclass(frozen=True)
class GainErrorTable:
    """Gains and error rates for both bases and all nine intensity pairs.

    ``records`` maps ``(basis, intensity_alice, intensity_bob)`` to a
    :class:`GainErrorRecord`, e.g. ``("z", "s", "v")`` for Alice sending the
    signal intensity and Bob vacuum in the z basis.
    """

    intensities: IntensitySet
    records: Mapping[tuple, GainErrorRecord]
    name: str = ""
    meta: Mapping[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for key in self.records:
            b, a, c = key
            if b not in BASES or a not in INTENSITY_LABELS or c not in INTENSITY_LABELS:
                raise ValueError(f"invalid cell key {key!r}")

    def __getitem__(self, key) -> GainErrorRecord:
        basis, a, b = key
        return self.records[(normalize_basis(basis), a, b)]

    def get(self, basis, pair: str) -> GainErrorRecord:
        return self[(basis, pair[0], pair[1])]

    def missing_cells(self, cells: Iterable[tuple], need_error: Iterable[tuple] = ()) -> list:
        need_error = set(need_error)
        missing = []
        for cell in cells:
            rec = self.records.get(cell)
            if rec is None or is_undefined(rec.Q):
                missing.append(cell)
            elif cell in need_error and is_undefined(rec.e) and rec.Q > 0:
                # an error rate is only needed where something was detected
                missing.append(cell)
        return missing

    @property
    def is_complete(self) -> bool:
        return not self.missing_cells(ALL_CELLS)

    def scaled(self, factor: float) -> "GainErrorTable":
        """Table with every gain (and its sigma) multiplied by ``factor``."""
        recs = {
            k: replace(r, Q=r.Q * factor, sigma_Q=r.sigma_Q * factor) for k, r in self.records.items()
        }
        return replace(self, records=recs)

    def with_intensities(self, intensities: IntensitySet) -> "GainErrorTable":
        return replace(self, intensities=intensities)
