# constants.py - Physical constants and labels (pure data, no logic)

from scipy import constants as _codata

PLANCK = _codata.h                 # J s
BOLTZMANN = _codata.k              # J / K

# Two-photon basis orderings; first letter is the signal photon
POLARIZATION_BASIS = ("HH", "HV", "VH", "VV")
TIMEBIN_BASIS = ("SS", "SL", "LS", "LL")

# Detector labels: PBS transmit -> 1, reflect -> 2 on each side
SIGNAL_DETECTORS = ("D1s", "D2s")
IDLER_DETECTORS = ("D1i", "D2i")
ALL_DETECTORS = SIGNAL_DETECTORS + IDLER_DETECTORS

# Two-detector coincidence outcomes (k, l), signal first
OUTCOMES = ((1, 1), (1, 2), (2, 1), (2, 2))

# Path labels
SHORT = "S"
LONG = "L"

# Memory dispositions
STORED = "stored"
TRANSMITTED = "transmitted"
LOST = "lost"
BRANCHES = (TRANSMITTED, STORED)

# Coincidence peaks, in order of signal-idler time difference
PEAKS = ("satellite_early", "central", "satellite_late")

# CHSH setting labels, sign pattern E1 + E2 + E3 - E4
CHSH_LABELS = (("X", "Y"), ("X'", "Y"), ("X", "Y'"), ("X'", "Y'"))
CHSH_SIGNS = (1, 1, 1, -1)

LOCAL_BOUND = 2.0

SCENARIOS = ("scan-phase", "scan-hwp", "chsh", "comb-spectrum", "efficiency", "table1")

# Numerical tolerances
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
POVM_TOL = 1e-10
