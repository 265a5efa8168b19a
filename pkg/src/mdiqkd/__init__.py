"""Simulation and decoy-state analysis of time-bin MDI-QKD with weak coherent pulses."""

__version__ = "0.1.0"

from .tables import (ALL_CELLS, UNDEFINED, ConfigurationError, GainErrorRecord, GainErrorTable, IntensitySet,
                     MissingCellError, is_undefined)
from .optics import (BSMOutcome, DetectorModel, DistinguishabilityParams, Projection, TimeBinPulsePair,
                     beamsplitter_transform, click_probabilities, encode_qubit, gain_and_error, hom_visibility,
                     mode_overlap, psi_minus_probability)
from .channel import (DriftParams, DriftState, FiberLink, StabilizerConfig, apply_stabilizers, simulate_drift,
                      step_drift, transmittance)
from .protocol import (CampaignResult, CellCounts, SetupConfig, SiftResult, classify_outcome, estimate_gain_error,
                       expected_table, run_campaign, sift_and_flip)
from .decoy import (DecoyBounds, InfeasibleBoundError, SecretKeyResult, binary_entropy, decoy_bounds,
                    e11_upper_bound, poisson_pn, propagate_uncertainty, q0_term, q11_lower_bound, secret_key_rate)
from .calibration import calibrate_detector
from .config import dump_scenario, find_setup, load_bundled_scenarios, load_scenario
from .datafiles import (ReportBundle, emit_measurements, ingest_measurements, load_bundled_measurements,
                        load_published_rates)
