"""FullMatch semi-supervised learning core (C++ extension)."""

from ._fullmatch import *  # noqa: F401,F403
from ._fullmatch import __version__  # noqa: F401
