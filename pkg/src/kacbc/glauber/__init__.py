"""Continuous-time Glauber dynamics of the spin-1 Kac model.

The event loop lives in a compiled Cython core (`_core`) with a pure-Python
twin (`_core_py`) selected at import; set KACBC_FORCE_PY=1 to force the
fallback.  Both consume the same random stream and produce bit-identical
trajectories.
"""

import os

from . import _core_py

if os.environ.get("KACBC_FORCE_PY"):
    core = _core_py
    COMPILED = False
else:
    try:
        from . import _core as core  # type: ignore[no-redef]
        COMPILED = True
    except ImportError:
        core = _core_py
        COMPILED = False

from .rates import (
    average_rate_function,
    detailed_balance_check,
    drift_function,
    jump_rates,
    ptilde,
    rate_sum_function,
    taylor_coefficients,
)
from .state import SpinConfiguration, initial_spins
from .engine import GlauberSimulation
