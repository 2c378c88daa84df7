"""Numeric policy shared across the package.

SLACK is the additive tolerance on every axiom and contraction
inequality; strictness checks (a comparison function staying strictly
below the diagonal) use no slack at all.  The remaining values are the
documented defaults of the iteration and scan operations; all of them
can be overridden per call or from the command line.
"""

from __future__ import annotations

import numpy as np

SLACK = 1e-12

GRID = 65
COORD_GUARD = 1e-6  # analytic sufficiency: ignore near-coincident grid points

MAX_ITERS = 10_000
TOL = 1e-9
WINDOW = 8
STARTS = 5
TABULATED_START_CAP = 64

PHI_SCAN_POINTS = 512
PHI_SCAN_LO = 1e-6
PHI_SCAN_HI = 1e3
LADDER = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
LADDER_SAMPLES = 128
LADDER_CONVERGED = 1e-9
SUBORBITS = 8
Q_SKIP = 1e-9
LEMMA2_SLACK = 1e-6

SEED_ENV = "FIXLAB_SEED"


def phi_scan_grid(
    n: int = PHI_SCAN_POINTS, lo: float = PHI_SCAN_LO, hi: float = PHI_SCAN_HI
) -> np.ndarray:
    """Log-spaced scan points used by the comparison-function checks."""
    return np.logspace(np.log10(lo), np.log10(hi), n)
