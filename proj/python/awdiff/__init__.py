"""A trous wavelet diffusion pipeline (C++ core)."""

try:
    # Installed layout: the extension lives inside the package.
    from ._awdiff import *  # noqa: F401,F403
except ImportError:
    # Build-tree layout: the extension sits on sys.path by itself.
    from _awdiff import *  # noqa: F401,F403
