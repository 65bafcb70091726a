"""Hellinger-Kantorovich gradient flows: distances, minimizing movements, reference PDE solvers."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
