"""Spin geometry on flat-coordinate tori: Clifford representations, metric
comparison maps, spinor identification under metric change, Dirac operators
and the Einstein-Dirac-Maxwell operator and functional."""

import os as _os

__version__ = "0.1.0"

# SPINLAB_THREADS caps the BLAS/OpenMP pools; it must be set before numpy loads
_threads = _os.environ.get("SPINLAB_THREADS")
if _threads and _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from spinlab.clifford import GammaRep, SpinLift, build_rep, clifford_apply, spin_lift, spinor_inner
from spinlab.errors import (
    CFLViolationError,
    DegenerateFormError,
    DimensionMismatchError,
    LogarithmError,
    NotJoinableError,
    NotPseudoOrthogonalError,
    SpinlabError,
    SymbolFitError,
    TwistMismatchError,
)

__all__ = [
    "__version__",
    "GammaRep",
    "SpinLift",
    "build_rep",
    "clifford_apply",
    "spin_lift",
    "spinor_inner",
    "CFLViolationError",
    "DegenerateFormError",
    "DimensionMismatchError",
    "LogarithmError",
    "NotJoinableError",
    "NotPseudoOrthogonalError",
    "SpinlabError",
    "SymbolFitError",
    "TwistMismatchError",
]
