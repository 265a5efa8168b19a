"""Three-intensity decoy-state bounds and the MDI-QKD secret key rate.

The single-photon-pair quantities are bounded from the measured signal,
decoy and vacuum gains of a symmetric setup (same intensities for Alice and
Bob). The bound on the (1,1) term is a *yield*: the probability of a psi-
announcement given that both parties emitted exactly one photon. The signal
state gain of single-photon pairs is that yield times ``P1(mu_s)**2``.

The key rate is reported per detector gate, so it carries the probability
that both parties chose the z basis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .tables import (UNDEFINED, ConfigurationError, GainErrorTable, MissingCellError, is_undefined,
                     normalize_basis)

DEFAULT_F_EC = 1.14
DEFAULT_Z_BASIS_PROBABILITY = 0.5


class InfeasibleBoundError(ArithmeticError):
    """The decoy analysis cannot certify any single-photon contribution."""


def poisson_pn(mu: float, n: int) -> float:
    if mu < 0 or n < 0:
        raise ValueError("poisson_pn needs mu >= 0 and n >= 0")
    if mu == 0:
        return 1.0 if n == 0 else 0.0
    return math.exp(-mu + n * math.log(mu) - math.lgamma(n + 1))


def binary_entropy(x):
    """h2(x) in bits, with h2(0) = h2(1) = 0."""
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise ValueError(f"binary entropy is defined on [0, 1], got {x!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -arr * np.log2(arr) - (1 - arr) * np.log2(1 - arr)
    h = np.where((arr == 0) | (arr == 1), 0.0, h)
    return float(h) if np.ndim(h) == 0 else h


def _h2_clipped(x):
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -x * np.log2(x) - (1 - x) * np.log2(1 - x)
    return np.where((x == 0) | (x == 1), 0.0, h)


def _cells(basis: str):
    return [(basis, a, b) for a, b in ("ss", "dd", "sv", "vs", "dv", "vd", "vv")]


ERROR_CELLS = [("x", "d", "d"), ("x", "v", "d"), ("x", "d", "v"), ("x", "v", "v"), ("z", "s", "s")]
REQUIRED_CELLS = _cells("z") + _cells("x")


def _require(table: GainErrorTable, cells, need_error=()):
    missing = table.missing_cells(cells, need_error)
    if missing:
        raise MissingCellError(missing)


def _error(rec) -> float:
    """Error rate for use in ``e * Q`` products; zero when nothing was detected."""
    return 0.0 if rec.Q == 0 and is_undefined(rec.e) else rec.e


def _gain(table, basis, pair):
    return table.get(basis, pair).Q


def _q0(mu, q_v_mu, q_mu_v, q_vv):
    p0 = math.exp(-mu)
    return p0 * q_v_mu + p0 * q_mu_v - p0 * p0 * q_vv


def q0_term(basis, which: str, table: GainErrorTable) -> float:
    """Contribution to the signal or decoy gain from pulses where a party sent vacuum."""
    b = normalize_basis(basis)
    label = {"decoy": "d", "signal": "s"}.get(which)
    if label is None:
        raise ValueError("which must be 'decoy' or 'signal'")
    _require(table, [(b, "v", label), (b, label, "v"), (b, "v", "v")])
    mu = table.intensities.value(label)
    return _q0(mu, _gain(table, b, "v" + label), _gain(table, b, label + "v"), _gain(table, b, "vv"))


def _y11_raw(mu_s, mu_d, q_ss, q_dd, q_sv, q_vs, q_dv, q_vd, q_vv):
    p1s, p2s = poisson_pn(mu_s, 1), poisson_pn(mu_s, 2)
    p1d, p2d = poisson_pn(mu_d, 1), poisson_pn(mu_d, 2)
    denom = p1s * p1d * (p1d * p2s - p1s * p2d)
    if not denom > 0:
        raise ConfigurationError(
            f"decoy bound is singular: need mu_signal > mu_decoy > 0 (got {mu_s}, {mu_d})"
        )
    q0d = _q0(mu_d, q_vd, q_dv, q_vv)
    q0s = _q0(mu_s, q_vs, q_sv, q_vv)
    return (p1s * p2s * (q_dd - q0d) - p1d * p2d * (q_ss - q0s)) / denom


def _y11_from_table(basis: str, table: GainErrorTable) -> float:
    _require(table, _cells(basis))
    mu = table.intensities
    g = {pair: _gain(table, basis, pair) for pair in ("ss", "dd", "sv", "vs", "dv", "vd", "vv")}
    return _y11_raw(mu.mu_signal, mu.mu_decoy, g["ss"], g["dd"], g["sv"], g["vs"], g["dv"], g["vd"], g["vv"])


def q11_lower_bound(basis, table: GainErrorTable) -> float:
    """Lower bound on the single-photon-pair yield, clamped at zero."""
    return max(0.0, _y11_from_table(normalize_basis(basis), table))


def _e11_raw(mu_d, e_dd, q_dd, e_vd, q_vd, e_dv, q_dv, e_vv, q_vv, y11_x):
    p0, p1 = poisson_pn(mu_d, 0), poisson_pn(mu_d, 1)
    num = e_dd * q_dd - p0 * e_vd * q_vd - p0 * e_dv * q_dv + p0 * p0 * e_vv * q_vv
    return num / (p1 * p1 * y11_x)


def e11_upper_bound(table: GainErrorTable, q11_x_lower: float) -> float:
    """Upper bound on the x-basis error rate of single-photon pairs."""
    if not q11_x_lower > 0:
        raise InfeasibleBoundError("no single-photon contribution certified (x-basis yield bound <= 0)")
    cells = [("x", "d", "d"), ("x", "v", "d"), ("x", "d", "v"), ("x", "v", "v")]
    _require(table, cells, cells)
    r = {pair: table.get("x", pair) for pair in ("dd", "vd", "dv", "vv")}
    return _e11_raw(table.intensities.mu_decoy, _error(r["dd"]), r["dd"].Q, _error(r["vd"]), r["vd"].Q,
                    _error(r["dv"]), r["dv"].Q, _error(r["vv"]), r["vv"].Q, q11_x_lower)


@dataclass(frozen=True)
class DecoyBounds:
    q11_z_lower: float  # single-photon-pair yields
    q11_x_lower: float
    e11_x_upper: float
    flags: tuple = ()

    def gain11_z(self, mu_signal: float) -> float:
        """Signal-state gain from single-photon pairs."""
        return poisson_pn(mu_signal, 1) ** 2 * self.q11_z_lower


def decoy_bounds(table: GainErrorTable) -> DecoyBounds:
    """All decoy bounds for a table, flagging clamped or out-of-range values."""
    validate_table(table)
    flags = []
    yz = _y11_from_table("z", table)
    yx = _y11_from_table("x", table)
    if yz < 0:
        flags.append("q11_z_clamped")
    if yx < 0:
        flags.append("q11_x_clamped")
    yz, yx = max(yz, 0.0), max(yx, 0.0)
    if yx > 0:
        e11 = e11_upper_bound(table, yx)
        if e11 > 0.5:
            flags.append("e11_above_half")
        if e11 < 0:
            flags.append("e11_negative")
    else:
        e11 = UNDEFINED
        flags.append("e11_uncertified")
    return DecoyBounds(yz, yx, e11, tuple(flags))


def validate_table(table: GainErrorTable):
    """Check cell coverage and the symmetric-setup assumption of the analysis."""
    _require(table, REQUIRED_CELLS, ERROR_CELLS)
    asym = table.meta.get("asymmetric") if table.meta else None
    if asym:
        raise ConfigurationError(
            f"decoy analysis assumes Alice and Bob use the same intensities: {asym}"
        )
    mu = table.intensities
    if not mu.mu_signal > mu.mu_decoy > 0:
        raise ConfigurationError("intensities must satisfy mu_signal > mu_decoy > 0")


@dataclass(frozen=True)
class SecretKeyResult:
    S: float  # bits per detector gate
    sigma_S: float
    gain11_z: float
    q11_z_lower: float
    q11_x_lower: float
    e11_x_upper: float
    Q_ss_z: float
    e_ss_z: float
    f: float
    sift_factor: float
    flags: tuple = ()
    n_samples: int = 0
    samples: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def single_photon_usable(self) -> bool:
        return not {"e11_above_half", "e11_uncertified"} & set(self.flags)

    @property
    def first_term(self) -> float:
        if not self.single_photon_usable:
            return 0.0
        return self.sift_factor * self.gain11_z * (1.0 - binary_entropy(min(max(self.e11_x_upper, 0.0), 1.0)))

    @property
    def second_term(self) -> float:
        return self.sift_factor * self.Q_ss_z * self.f * binary_entropy(self.e_ss_z)


def _key_rate(mu_s, mu_d, g, e, f, sift):
    """Vectorised key rate. ``g``/``e`` map (basis, pair) to gains/error rates."""
    yz = np.maximum(_y11_raw(mu_s, mu_d, *(g[("z", p)] for p in ("ss", "dd", "sv", "vs", "dv", "vd", "vv"))), 0.0)
    yx = np.maximum(_y11_raw(mu_s, mu_d, *(g[("x", p)] for p in ("ss", "dd", "sv", "vs", "dv", "vd", "vv"))), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        e11 = _e11_raw(mu_d, e[("x", "dd")], g[("x", "dd")], e[("x", "vd")], g[("x", "vd")],
                       e[("x", "dv")], g[("x", "dv")], e[("x", "vv")], g[("x", "vv")], yx)
    usable = (yx > 0) & (e11 <= 0.5)
    first = np.where(usable, poisson_pn(mu_s, 1) ** 2 * yz * (1.0 - _h2_clipped(np.where(usable, e11, 0.0))), 0.0)
    second = g[("z", "ss")] * f * _h2_clipped(e[("z", "ss")])
    return sift * (first - second)


def secret_key_rate(table: GainErrorTable, f: float = DEFAULT_F_EC,
                    z_basis_probability: float = DEFAULT_Z_BASIS_PROBABILITY) -> SecretKeyResult:
    """Secret key rate per detector gate from a measured gain/error table.

    ``S = p_z**2 * [P1(mu_s)**2 * Y11_z * (1 - h2(e11_x)) - Q_ss_z * f * h2(e_ss_z)]``
    where ``p_z`` is each party's probability of choosing the z basis. The
    first term is dropped (and flagged) when ``e11_x`` exceeds 1/2 or no
    single-photon yield is certified. Negative rates are returned as is.
    """
    if not f >= 1.0:
        raise ConfigurationError(f"error-correction efficiency f must be >= 1, got {f}")
    if not 0.0 < z_basis_probability <= 1.0:
        raise ConfigurationError("z_basis_probability must lie in (0, 1]")
    bounds = decoy_bounds(table)
    mu_s = table.intensities.mu_signal
    ss = table.get("z", "ss")
    sift = z_basis_probability**2
    result = SecretKeyResult(0.0, 0.0, bounds.gain11_z(mu_s), bounds.q11_z_lower, bounds.q11_x_lower,
                             bounds.e11_x_upper, ss.Q, _error(ss), f, sift, bounds.flags)
    return replace(result, S=result.first_term - result.second_term)


def propagate_uncertainty(table: GainErrorTable, f: float = DEFAULT_F_EC, n_samples: int = 20000, seed=0,
                          z_basis_probability: float = DEFAULT_Z_BASIS_PROBABILITY,
                          keep_samples: bool = False) -> SecretKeyResult:
    """Monte-Carlo spread of S from independent Gaussian fluctuations of every cell.

    Gains are clamped at zero and error rates to [0, 1]. Correlations between
    cells are ignored. The returned ``S`` is the sample mean and ``sigma_S``
    the sample standard deviation.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    point = secret_key_rate(table, f, z_basis_probability)
    bad = [c for c in REQUIRED_CELLS if is_undefined(table[c].sigma_Q)]
    bad += [c for c in ERROR_CELLS if is_undefined(table[c].sigma_e) and (table[c].Q > 0 or table[c].sigma_Q > 0)]
    if bad:
        raise MissingCellError(sorted(set(bad)))
    rng = np.random.default_rng(seed)
    g, e = {}, {}
    # fixed cell order keeps the draw sequence reproducible
    for basis, a, b in REQUIRED_CELLS:
        rec = table[(basis, a, b)]
        g[(basis, a + b)] = np.maximum(rng.normal(rec.Q, rec.sigma_Q, n_samples), 0.0)
    for basis, a, b in ERROR_CELLS:
        rec = table[(basis, a, b)]
        sigma_e = 0.0 if is_undefined(rec.sigma_e) else rec.sigma_e
        e[(basis, a + b)] = np.clip(rng.normal(_error(rec), sigma_e, n_samples), 0.0, 1.0)
    mu = table.intensities
    s = _key_rate(mu.mu_signal, mu.mu_decoy, g, e, f, z_basis_probability**2)
    return SecretKeyResult(float(np.mean(s)), float(np.std(s, ddof=1)), point.gain11_z, point.q11_z_lower,
                           point.q11_x_lower, point.e11_x_upper, point.Q_ss_z, point.e_ss_z, f,
                           point.sift_factor, point.flags, n_samples, s if keep_samples else None)
