"""Python access to the nutty motion filter, validator and command line."""

from ._nutty import *  # noqa: F401,F403
from ._nutty import __doc__  # noqa: F401
