"""Process-wide numeric settings.

``TOLERANCE`` is the absolute tolerance for algebraic identities. It can be
overridden with the ``QTSORT_TOL`` environment variable or by calling
:func:`set_tolerance`. ``QTSORT_MAX_QUBITS`` caps dense statevector size.
"""

import os

DEFAULT_TOLERANCE = 1e-9
DEFAULT_MAX_QUBITS = 22
DEFAULT_C_DH = 22.5
DEFAULT_PLAN_C = 2
BBHT_LAMBDA = 6 / 5

TOLERANCE = float(os.environ.get("QTSORT_TOL", DEFAULT_TOLERANCE))


def set_tolerance(tol: float) -> None:
    global TOLERANCE
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    TOLERANCE = float(tol)


def max_qubits() -> int:
    """Largest statevector (in qubits) that ``new_state`` will allocate."""
    return int(os.environ.get("QTSORT_MAX_QUBITS", DEFAULT_MAX_QUBITS))
