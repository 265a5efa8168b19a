import pytest

from mdiqkd.calibration import calibrate_detector, dark_count_from_vacuum_gain, efficiency_from_signal_gain
from mdiqkd.config import find_setup, load_bundled_scenarios
from mdiqkd.datafiles import load_bundled_measurements
from mdiqkd.optics import DetectorModel, encode_qubit, gain_and_error, psi_minus_probability


@pytest.fixture(scope="module")
def fitted():
    table = load_bundled_measurements()["1a"]
    setup = find_setup(load_bundled_scenarios(), "1a")
    det = calibrate_detector(table[("z", "v", "v")].Q, table[("z", "s", "s")].Q,
                             table.intensities.mu_signal, setup.transmittances)
    return det, setup, table


def test_dark_count_from_vacuum_gain_inverts_model():
    d = dark_count_from_vacuum_gain(7.1e-10)
    assert 2 * d**2 * (1 - d) ** 2 == pytest.approx(7.1e-10, rel=1e-12)
    v = encode_qubit("z", 0, 0.0)
    assert psi_minus_probability(v, v, 1.0, DetectorModel(dark_count_prob=d)) == pytest.approx(7.1e-10, rel=1e-9)


def test_dark_count_domain():
    assert dark_count_from_vacuum_gain(0.0) == 0.0
    with pytest.raises(ValueError):
        dark_count_from_vacuum_gain(-1e-9)


def test_fitted_detector_reproduces_signal_gain(fitted):
    det, setup, table = fitted
    q, _ = gain_and_error("z", table.intensities.mu_signal, table.intensities.mu_signal, 1.0, det,
                          setup.transmittances)
    assert q == pytest.approx(1.028e-4, rel=1e-9)


def test_bundled_scenario_carries_fitted_values(fitted):
    det, setup, _ = fitted
    assert setup.detector.dark_count_prob == pytest.approx(det.dark_count_prob, rel=1e-3)
    assert setup.detector.efficiency == pytest.approx(det.efficiency, rel=1e-3)


def test_unreachable_gain_rejected():
    with pytest.raises(ValueError):
        efficiency_from_signal_gain(0.5, 0.4, (0.01, 0.01), 0.0)
