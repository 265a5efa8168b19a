"""Fit detector parameters to measured gains.

The dark-count probability follows from the vacuum-vacuum gain, which only
dark coincidences can produce. The efficiency is then tuned until the
simulated signal-signal z-basis gain matches a measured value.
"""
from __future__ import annotations

import math
from dataclasses import replace

from scipy.optimize import brentq

from .optics import DetectorModel, gain_and_error


def dark_count_from_vacuum_gain(q_vv: float) -> float:
    """Solve ``2 d**2 (1 - d)**2 = q_vv`` for the per-slot dark-count probability."""
    if not 0 <= q_vv <= 0.125:
        raise ValueError("vacuum gain must lie in [0, 1/8]")
    root = math.sqrt(q_vv / 2.0)
    return (1.0 - math.sqrt(1.0 - 4.0 * root)) / 2.0


def efficiency_from_signal_gain(q_ss_z: float, mu_signal: float, transmittances, dark_count_prob: float,
                                detector: DetectorModel | None = None) -> float:
    """Detector efficiency reproducing ``q_ss_z`` (the z gain is overlap independent)."""
    base = detector or DetectorModel()

    def mismatch(eta):
        det = replace(base, efficiency=eta, dark_count_prob=dark_count_prob)
        return gain_and_error("z", mu_signal, mu_signal, 1.0, det, transmittances)[0] - q_ss_z

    if mismatch(1.0) < 0:
        raise ValueError("measured gain is unreachable even with unit efficiency")
    return brentq(mismatch, 1e-9, 1.0, xtol=1e-14, rtol=1e-12)


def calibrate_detector(q_vv: float, q_ss_z: float, mu_signal: float, transmittances,
                       detector: DetectorModel | None = None) -> DetectorModel:
    d = dark_count_from_vacuum_gain(q_vv)
    eta = efficiency_from_signal_gain(q_ss_z, mu_signal, transmittances, d, detector)
    return replace(detector or DetectorModel(), efficiency=eta, dark_count_prob=d)
