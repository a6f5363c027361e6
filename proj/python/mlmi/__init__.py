"""Two-level missing-data simulation laboratory."""

try:
    from ._core import *  # noqa: F401,F403
    from ._core import __version__  # noqa: F401
except ImportError:  # running against a build tree on sys.path
    from _core import *  # noqa: F401,F403
    from _core import __version__  # noqa: F401
