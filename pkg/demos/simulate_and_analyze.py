"""End-to-end: simulate a measurement campaign, then run the decoy analysis on it.

A campaign samples detector clicks for every basis and intensity pair while
the channel drifts, producing a gain/error table in the same format as the
measured data. The analysis chain then turns that table into a key rate.
"""
from mdiqkd import (expected_table, find_setup, load_bundled_scenarios, propagate_uncertainty, run_campaign,
                    secret_key_rate)


def main():
    setup = find_setup(load_bundled_scenarios(), "setup-1a")
    res = run_campaign(setup, gates_per_cell=10**9, seed=3)
    z = res.table[("z", "s", "s")]
    x = res.table[("x", "s", "s")]
    print(f"{setup.name}: Q_ss^z={z.Q:.3e} e_ss^z={z.e:.4f}  Q_ss^x={x.Q:.3e} e_ss^x={x.e:.4f}")
    print(f"wall clock {res.total_wall_clock / 3600:.1f} h at duty fraction {res.duty_fraction:.2f}")
    spread = propagate_uncertainty(res.table, n_samples=5000, seed=0).sigma_S
    print(f"simulated table: S = {secret_key_rate(res.table).S:.3e} +/- {spread:.1e}")

    # the sampled error rate in z is far below the measured one because the
    # model has no finite extinction ratio by default, so S comes out higher
    # the noise-free expectation for the same physical parameters
    exp = expected_table(setup.intensities, 0.97, setup.detector, setup.transmittances)
    print(f"expected table at overlap 0.97: S = {secret_key_rate(exp).S:.3e}")


if __name__ == "__main__":
    main()
