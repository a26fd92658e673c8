"""Numerical checks for N-functions, Calderon-Zygmund operators, the Bogovskii
operator and interior regularity of power-law Stokes flow.

Modules: ``nfunc`` (phi_{p,delta} calculus), ``tensor`` (power-law stresses),
``grid`` (difference quotients), ``whitney``, ``czop``, ``bogovskii``,
``pstokes`` and ``cli``.  Set ``BOGOTOOL_NUMBA=0`` to use the numpy kernels.
"""

from ._accel import backend_name
from .errors import BogotoolError, ConvergenceError, DomainError, PreconditionError, SingularityError

__version__ = "0.1.0"

__all__ = [
    "BogotoolError",
    "ConvergenceError",
    "DomainError",
    "PreconditionError",
    "SingularityError",
    "backend_name",
    "__version__",
]
