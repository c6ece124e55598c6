# SPDX-License-Identifier: Apache-2.0
"""Mott variable-range hopping simulation toolkit.

Thin Python layer over the C++ core: environment generation for marked point
processes, the kinetic Monte Carlo hopping walk, continuum-percolation
estimators, and the variational-bound helpers.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__ as _core_doc

__all__ = [name for name in dir() if not name.startswith("_")]
__doc__ = _core_doc
