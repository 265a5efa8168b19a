import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.stats import entropy, poisson

from mdiqkd.datafiles import load_bundled_measurements, load_published_rates
from mdiqkd.decoy import (InfeasibleBoundError, _y11_raw, binary_entropy, decoy_bounds, e11_upper_bound, poisson_pn,
                          propagate_uncertainty, q0_term, q11_lower_bound, secret_key_rate)
from mdiqkd.montecarlo import fock_oracle
from mdiqkd.optics import DetectorModel
from mdiqkd.protocol import expected_table
from mdiqkd.tables import (ALL_CELLS, UNDEFINED, ConfigurationError, GainErrorRecord, GainErrorTable, IntensitySet,
                           MissingCellError)


@pytest.fixture(scope="module")
def bundled():
    return load_bundled_measurements()


def mixture_table(mu_s, mu_d, yields, errors, nmax=1):
    """Gains and errors of a Poisson mixture with the given photon-number yields Y_nm and error rates."""
    mu = IntensitySet(mu_s, mu_d)
    recs = {}
    for basis, a, b in ALL_CELLS:
        ma, mb = mu.value(a), mu.value(b)
        q = qe = 0.0
        for n in range(nmax + 1):
            for m in range(nmax + 1):
                w = poisson_pn(ma, n) * poisson_pn(mb, m) * yields[basis].get((n, m), 0.0)
                q += w
                qe += w * errors[basis].get((n, m), 0.0)
        recs[(basis, a, b)] = GainErrorRecord(q, qe / q if q > 0 else UNDEFINED)
    return GainErrorTable(mu, recs)


SIMPLE_YIELDS = {"z": {(0, 0): 1e-9, (0, 1): 2e-6, (1, 0): 3e-6, (1, 1): 4e-3},
                 "x": {(0, 0): 1e-9, (0, 1): 2e-6, (1, 0): 3e-6, (1, 1): 5e-3}}
SIMPLE_ERRORS = {b: {(0, 0): 0.5, (0, 1): 0.5, (1, 0): 0.5, (1, 1): 0.1} for b in "zx"}


# -- Poisson weights and entropy ----------------------------------------------

def test_poisson_vacuum():
    assert poisson_pn(0.0, 0) == 1.0


def test_poisson_single_photon():
    assert poisson_pn(0.05, 1) == pytest.approx(0.0475615, abs=1e-7)


@pytest.mark.parametrize("mu,n", [(0.4, 0), (0.4, 3), (0.05, 2), (2.5, 7)])
def test_poisson_matches_scipy(mu, n):
    assert poisson_pn(mu, n) == pytest.approx(poisson.pmf(n, mu), rel=1e-12)


def test_poisson_normalized():
    assert math.fsum(poisson_pn(0.4, n) for n in range(50)) == pytest.approx(1.0, abs=1e-12)


def test_poisson_domain():
    with pytest.raises(ValueError):
        poisson_pn(-0.1, 1)


def test_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.11) == pytest.approx(entropy([0.11, 0.89], base=2), rel=1e-12)
    assert binary_entropy(0.11) == pytest.approx(0.49992, abs=1e-5)


@pytest.mark.parametrize("x", [-0.01, 1.01, float("nan")])
def test_entropy_domain(x):
    with pytest.raises(ValueError):
        binary_entropy(x)


@given(st.floats(0.0, 1.0))
def test_entropy_symmetric(x):
    assume(1.0 - (1.0 - x) == x)  # x and 1 - x both exactly representable
    assert binary_entropy(x) == binary_entropy(1.0 - x)


@given(st.floats(0.0, 1.0))
def test_entropy_bounded(x):
    assert 0.0 <= binary_entropy(x) <= 1.0


# -- vacuum terms --------------------------------------------------------------

def test_q0_setup_1a_x_decoy(bundled):
    t = bundled["1a"]
    p0 = math.exp(-0.05)
    expected = p0 * (8.59e-7 + 8.76e-7) - p0**2 * 7.1e-10
    assert q0_term("x", "decoy", t) == pytest.approx(expected, rel=1e-12)


def test_q0_setup_1a_x_signal(bundled):
    t = bundled["1a"]
    p0 = math.exp(-0.396)
    expected = p0 * (5.77e-5 + 5.68e-5) - p0**2 * 7.1e-10
    assert q0_term("x", "signal", t) == pytest.approx(expected, rel=1e-12)


def test_q0_zero_without_vacuum_gains():
    t = mixture_table(0.4, 0.05, {"z": {(1, 1): 1e-3}, "x": {(1, 1): 1e-3}}, SIMPLE_ERRORS)
    assert q0_term("z", "decoy", t) == 0.0
    assert q0_term("x", "signal", t) == 0.0


def test_q0_swap_symmetric(bundled):
    t = bundled["1b"]
    recs = dict(t.records)
    recs[("x", "v", "d")], recs[("x", "d", "v")] = recs[("x", "d", "v")], recs[("x", "v", "d")]
    assert q0_term("x", "decoy", replace(t, records=recs)) == q0_term("x", "decoy", t)


def test_q0_missing_cell(bundled):
    recs = {k: v for k, v in bundled["1a"].records.items() if k != ("z", "v", "d")}
    with pytest.raises(MissingCellError, match="vd"):
        q0_term("z", "decoy", replace(bundled["1a"], records=recs))


# -- bounds ----------------------------------------------------------------------

def test_y11_bound_exact_for_zero_and_one_photon_mixture():
    t = mixture_table(0.45, 0.07, SIMPLE_YIELDS, SIMPLE_ERRORS)
    assert q11_lower_bound("z", t) == pytest.approx(4e-3, rel=1e-9)
    assert q11_lower_bound("x", t) == pytest.approx(5e-3, rel=1e-9)
    assert e11_upper_bound(t, q11_lower_bound("x", t)) == pytest.approx(0.1, rel=1e-9)


def test_y11_bound_below_truth_with_multiphoton_yields():
    rng = np.random.default_rng(3)
    for _ in range(20):
        yields = {b: {(n, m): rng.uniform(0, 1e-2) * (n + m + 0.01) for n in range(5) for m in range(5)}
                  for b in "zx"}
        errors = {b: {(n, m): rng.uniform(0, 0.5) for n in range(5) for m in range(5)} for b in "zx"}
        t = mixture_table(rng.uniform(0.2, 0.6), rng.uniform(0.01, 0.1), yields, errors, nmax=4)
        assert q11_lower_bound("z", t) <= yields["z"][(1, 1)] * (1 + 1e-9)
        y = q11_lower_bound("x", t)
        if y > 0:
            assert e11_upper_bound(t, y) >= errors["x"][(1, 1)] * (1 - 1e-9)


def test_y11_bound_zero_table():
    t = mixture_table(0.4, 0.05, {"z": {}, "x": {}}, SIMPLE_ERRORS)
    assert q11_lower_bound("z", t) == 0.0


def test_y11_bound_negative_is_clamped_and_flagged(bundled):
    t = bundled["1a"]
    recs = dict(t.records)
    recs[("z", "d", "d")] = replace(recs[("z", "d", "d")], Q=0.0)
    b = decoy_bounds(replace(t, records=recs))
    assert b.q11_z_lower == 0.0
    assert "q11_z_clamped" in b.flags


def test_e11_zero_numerator():
    errors = {b: {k: 0.0 for k in SIMPLE_YIELDS[b]} for b in "zx"}
    t = mixture_table(0.45, 0.07, SIMPLE_YIELDS, errors)
    assert e11_upper_bound(t, q11_lower_bound("x", t)) == pytest.approx(0.0, abs=1e-12)


def test_e11_requires_certified_yield(bundled):
    with pytest.raises(InfeasibleBoundError, match="no single-photon contribution certified"):
        e11_upper_bound(bundled["1a"], 0.0)


def test_singular_intensities_rejected(bundled):
    # the bound's denominator vanishes for equal intensities, which IntensitySet already refuses
    with pytest.raises(ValueError):
        bundled["1a"].with_intensities(IntensitySet(0.05, 0.05))
    with pytest.raises(ConfigurationError, match="mu_signal > mu_decoy"):
        _y11_raw(0.05, 0.05, *([1e-6] * 7))


def test_asymmetric_table_rejected(bundled):
    t = replace(bundled["1a"], meta={"asymmetric": "Alice mu_s=0.4, Bob mu_s=0.3"})
    with pytest.raises(ConfigurationError, match="same intensities"):
        decoy_bounds(t)


@pytest.mark.parametrize("c", [1e-3, 0.5, 7.0])
def test_bounds_and_rate_terms_scale_with_gains(bundled, c):
    t = bundled["1a"]
    r0, r1 = secret_key_rate(t), secret_key_rate(t.scaled(c))
    assert r1.q11_z_lower == pytest.approx(c * r0.q11_z_lower, rel=1e-12)
    assert r1.q11_x_lower == pytest.approx(c * r0.q11_x_lower, rel=1e-12)
    assert r1.e11_x_upper == pytest.approx(r0.e11_x_upper, rel=1e-12)
    assert r1.first_term == pytest.approx(c * r0.first_term, rel=1e-12)
    assert r1.second_term == pytest.approx(c * r0.second_term, rel=1e-12)


@pytest.mark.parametrize("trial", range(5))
def test_bounds_hold_against_photon_tagging_oracle(trial):
    rng = np.random.default_rng(100 + trial)
    mu_s, mu_d = rng.uniform(0.2, 0.6), rng.uniform(0.01, 0.1)
    det = DetectorModel(efficiency=rng.uniform(0.05, 0.9), dark_count_prob=10 ** rng.uniform(-7, -3.5))
    trans = tuple(rng.uniform(0.05, 1.0, 2))
    b = decoy_bounds(expected_table(IntensitySet(mu_s, mu_d), 0.0, det, trans))
    z = fock_oracle("z", mu_s, mu_d, det, trans, 10**6, seed=trial, fixed_photons=(1, 1)).tagged_yield
    x = fock_oracle("x", mu_s, mu_d, det, trans, 10**6, seed=50 + trial, fixed_photons=(1, 1))
    assert b.q11_z_lower <= z.value + 3 * z.stderr
    assert b.q11_x_lower <= x.tagged_yield.value + 3 * x.tagged_yield.stderr
    assert b.e11_x_upper >= x.tagged_error.value - 3 * x.tagged_error.stderr


def test_oracle_tagging_within_full_mixture():
    # tagging (1,1) inside Poisson-distributed gates agrees with sampling that sector directly
    det = DetectorModel(efficiency=0.6, dark_count_prob=1e-4)
    mixed = fock_oracle("z", 0.5, 0.5, det, (0.8, 0.8), 2 * 10**6, seed=1)
    direct = fock_oracle("z", 0.5, 0.5, det, (0.8, 0.8), 10**6, seed=2, fixed_photons=(1, 1))
    diff = mixed.tagged_yield.value - direct.tagged_yield.value
    assert abs(diff) <= 3 * math.hypot(mixed.tagged_yield.stderr, direct.tagged_yield.stderr)


# -- key rate -----------------------------------------------------------------

@pytest.mark.parametrize("setup", ["1a", "1b", "1c", "2"])
def test_rate_within_published_uncertainty(bundled, setup):
    s, sigma = load_published_rates()[setup]
    r = secret_key_rate(bundled[setup], 1.14)
    assert abs(r.S - s) <= sigma
    assert r.S > 0
    assert r.flags == ()


def test_rate_without_single_photons_is_nonpositive(bundled):
    t = bundled["1a"]
    recs = dict(t.records)
    recs[("z", "d", "d")] = replace(recs[("z", "d", "d")], Q=0.0)
    r = secret_key_rate(replace(t, records=recs))
    assert r.q11_z_lower == 0.0
    assert r.S == pytest.approx(-r.sift_factor * r.Q_ss_z * 1.14 * binary_entropy(r.e_ss_z), rel=1e-12)
    assert r.S <= 0


def test_rate_drops_first_term_above_half(bundled):
    t = bundled["1a"]
    recs = dict(t.records)
    recs[("x", "d", "d")] = replace(recs[("x", "d", "d")], e=0.6)
    r = secret_key_rate(replace(t, records=recs))
    assert "e11_above_half" in r.flags
    assert r.first_term == 0.0
    assert r.S < 0


def test_rate_decreases_with_f(bundled):
    for t in bundled.values():
        assert secret_key_rate(t, 1.0).S > secret_key_rate(t, 1.14).S


def test_rate_rejects_f_below_one(bundled):
    with pytest.raises(ConfigurationError):
        secret_key_rate(bundled["1a"], 0.9)


def test_rate_echoes_inputs(bundled):
    r = secret_key_rate(bundled["1a"], 1.2)
    assert (r.Q_ss_z, r.e_ss_z, r.f, r.sift_factor) == (1.028e-4, 0.0311, 1.2, 0.25)
    assert r.gain11_z == pytest.approx(poisson_pn(0.396, 1) ** 2 * r.q11_z_lower)


def test_rate_needs_complete_table(bundled):
    recs = {k: v for k, v in bundled["1a"].records.items() if k[0] != "x" or k[1:] != ("d", "d")}
    with pytest.raises(MissingCellError, match=r"\(x, dd\)"):
        secret_key_rate(replace(bundled["1a"], records=recs))


# -- uncertainty propagation ----------------------------------------------------

def _zero_sigma(t):
    return replace(t, records={k: replace(v, sigma_Q=0.0, sigma_e=0.0) for k, v in t.records.items()})


def _scaled_sigma(t, c):
    return replace(t, records={k: replace(v, sigma_Q=c * v.sigma_Q, sigma_e=c * v.sigma_e)
                               for k, v in t.records.items()})


def test_zero_sigma_gives_point_estimate(bundled):
    t = _zero_sigma(bundled["1a"])
    r = propagate_uncertainty(t, 1.14, 5000, seed=1)
    assert r.sigma_S == 0.0
    assert r.S == pytest.approx(secret_key_rate(t).S, rel=1e-12)


def test_setup_1a_sigma_within_factor_two(bundled):
    r = propagate_uncertainty(bundled["1a"], 1.14, 20000, seed=0)
    assert 0.2e-6 <= r.sigma_S <= 0.8e-6


@pytest.mark.parametrize("setup", ["1a", "1b", "1c", "2"])
def test_sigma_comparable_to_published(bundled, setup):
    _, sigma = load_published_rates()[setup]
    r = propagate_uncertainty(bundled[setup], 1.14, 20000, seed=0)
    assert sigma / 2 <= r.sigma_S <= 2 * sigma


def test_doubling_sigmas_widens_spread(bundled):
    t = bundled["1b"]
    for seed in range(5):
        a = propagate_uncertainty(t, 1.14, 5000, seed=seed).sigma_S
        b = propagate_uncertainty(_scaled_sigma(t, 2.0), 1.14, 5000, seed=seed).sigma_S
        assert b > a


def test_propagation_is_deterministic(bundled):
    a = propagate_uncertainty(bundled["2"], 1.14, 2000, seed=9, keep_samples=True)
    b = propagate_uncertainty(bundled["2"], 1.14, 2000, seed=9, keep_samples=True)
    assert a.S == b.S and a.sigma_S == b.sigma_S
    assert np.array_equal(a.samples, b.samples)


def test_propagation_needs_enough_samples(bundled):
    with pytest.raises(ValueError):
        propagate_uncertainty(bundled["1a"], 1.14, 999)


def test_propagation_rejects_undefined_sigma(bundled):
    t = bundled["1a"]
    recs = dict(t.records)
    recs[("x", "v", "d")] = replace(recs[("x", "v", "d")], sigma_e=UNDEFINED)
    with pytest.raises(MissingCellError, match=r"\(x, vd\)"):
        propagate_uncertainty(replace(t, records=recs), 1.14, 1000)
