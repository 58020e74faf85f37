"""Kernel backend chosen at import time.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``QUTRITLAB_PURE`` is set to a non-empty value, the
pure-Python implementation is loaded. Both expose the same functions.
"""
import os

from . import _kernels_py as pure

compiled = None
if not os.environ.get("QUTRITLAB_PURE"):
    try:
        from . import _kernels as compiled
    except ImportError:
        compiled = None

backend = compiled if compiled is not None else pure
BACKEND = "compiled" if compiled is not None else "python"

WRIGHT = pure.WRIGHT
KCBS = pure.KCBS

n_params = pure.n_params
decode = pure.decode
repair_closure = pure.repair_closure
pentagon_objective = backend.pentagon_objective
minimize_pentagon = backend.minimize_pentagon
batch_joint = backend.batch_joint


def for_dimension(dim):
    """Backend able to handle ``dim`` (the compiled one stops at 8)."""
    if compiled is not None and dim <= compiled.MAX_DIM:
        return compiled
    return pure
