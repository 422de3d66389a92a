# config.py - Default experiment parameters and file locations
#
# Values reproduce the storage experiment: SPDC source with a cavity/etalon
# filter cascade, Nd:Y2SiO5 two-crystal AFC memory and Franson analyzers.
# Keys carry their units; experiment_config.py converts everything to SI.

# Idler filtering: 240 MHz cavity (FSR 60 GHz) selected by a 27 GHz VBG
DEFAULT_IDLER_FILTERS = [
    {"kind": "gaussian_grating", "fwhm_mhz": 27000.0, "fsr_mhz": None, "center_detuning_mhz": 0.0},
    {"kind": "lorentzian_cavity", "fwhm_mhz": 240.0, "fsr_mhz": 60000.0, "center_detuning_mhz": 0.0},
]

# Signal filtering: 600 MHz etalon (FSR 50 GHz) selected by a 54 GHz VBG
DEFAULT_SIGNAL_FILTERS = [
    {"kind": "gaussian_grating", "fwhm_mhz": 54000.0, "fsr_mhz": None, "center_detuning_mhz": 0.0},
    {"kind": "lorentzian_cavity", "fwhm_mhz": 600.0, "fsr_mhz": 50000.0, "center_detuning_mhz": 0.0},
]

DEFAULT_EXPERIMENT = {
    "source": {
        "pair_probability": 0.015,         # per coherence-time window, 2.5 mW pump
        "coherence_time_ns": 1.9,
        "bell_phase_rad": 0.0,
        "visibility_pi": 0.96,             # fitted polarization visibility
        "visibility_tau": 0.92,            # fitted energy-time visibility
        "signal_transmission": 0.20,       # heralding efficiency up to the memory
        "idler_transmission": 0.133,       # 0.133 x 0.75 detector ~ 10 % overall
        "signal_filters": DEFAULT_SIGNAL_FILTERS,
        "idler_filters": DEFAULT_IDLER_FILTERS,
    },
    "memory": {
        "peak_period_mhz": 20.0,           # 1/Delta = 50 ns storage
        "finesse": 2.0,
        "peak_shape": "gaussian",
        "d_peak": 1.8,                     # below the bare 2.35 (power broadening)
        "d_background": 0.25,
        "total_bandwidth_mhz": 600.0,      # carrier band plus two sideband orders
        "sideband_depth_scaling": [0.6, 1.0, 1.0, 1.0, 0.6],
        "photon_fwhm_mhz": 170.0,
        "efficiency_override": None,
        "transmission_override": None,
    },
    "sandwich": {
        "d1": 0.55,                        # D1 axis; d1 + d2 = 2.35 measured average
        "d2": 1.80,
        "hwp_angle_error_rad": 0.0,
        "hwp_retardation_error_rad": 0.1,
        "zeeman_splitting_ghz": 11.0,      # 300 mT static field
        "temperature_k": 2.7,
        "second_transition_od": 2.85,      # averaged OD of the second Zeeman transition
    },
    "analyzers": {
        "delay_ns": 5.5,
        "signal": {
            "phase_rad": 0.0,
            "birefringence_phase_rad": 0.0,
            "qwp_angle_deg": 0.0,
            "hwp_angle_deg": 0.0,
        },
        "idler": {
            "phase_rad": 0.0,
            "birefringence_phase_rad": 0.0,
            "qwp_angle_deg": 0.0,
            "hwp_angle_deg": 0.0,
        },
    },
    # Si APD for the 883 nm signal, WSi nanowires for the 1338 nm idler.
    # Dark-count rates are not reported; typical device values.
    "detectors": {
        "D1s": {"efficiency": 0.30, "dark_count_rate_hz": 100.0, "jitter_ps": 0.0},
        "D2s": {"efficiency": 0.30, "dark_count_rate_hz": 100.0, "jitter_ps": 0.0},
        "D1i": {"efficiency": 0.75, "dark_count_rate_hz": 10.0, "jitter_ps": 0.0},
        "D2i": {"efficiency": 0.75, "dark_count_rate_hz": 10.0, "jitter_ps": 0.0},
    },
    # 0.1 ns bins and a one-bin window: timestamps are jitter-free, and
    # wider windows dilute the stored-photon correlators with accidentals.
    "counting": {
        "bin_width_ns": 0.1,
        "coincidence_window_ns": 0.1,
        "histogram_span_ns": 24.0,
    },
    "run": {
        "scenario": "table1",
        "seed": 2015,
        "target_coincidences_per_setting": 1500,
        "target_branch": "stored",
        "min_coincidences_per_setting": 100,
        "duration_s": None,
        "scan_points": 12,
        "batch_pairs": 2000000,
    },
}

# Output settings
DEFAULT_CONFIG_FILE = "default_experiment.yaml"
DATA_FOLDER = "data"
OUTPUT_FOLDER = "results"
