"""Staged event trees for transparent treatment effect estimation."""

from ._stagedcausal import *  # noqa: F401,F403
from ._stagedcausal import __doc__  # noqa: F401
