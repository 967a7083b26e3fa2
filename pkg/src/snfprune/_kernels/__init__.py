"""Kernel backend selection.

Imports the compiled extension when present, otherwise the pure numpy
fallback. ``SNFPRUNE_NO_EXT=1`` forces the fallback, which is handy for
testing both code paths on one install.
"""

import os

if os.environ.get("SNFPRUNE_NO_EXT") == "1":
    from snfprune._kernels._fallback import conv2d_fill, jacobi_sweeps
    BACKEND = "python"
else:
    try:
        from snfprune._kernels._impl import conv2d_fill, jacobi_sweeps
        BACKEND = "compiled"
    except ImportError:
        from snfprune._kernels._fallback import conv2d_fill, jacobi_sweeps
        BACKEND = "python"

__all__ = ["BACKEND", "conv2d_fill", "jacobi_sweeps"]
