"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
fallback. Setting ``FLOWCAST_PURE_PYTHON=1`` forces the fallback.
"""
import logging
import os

logger = logging.getLogger(__name__)

if os.environ.get("FLOWCAST_PURE_PYTHON", "") not in ("", "0"):
    from ._fallback import enet_path, hy_contrast, hy_cov

    BACKEND = "python"
else:
    try:
        from ._kernels import enet_path, hy_contrast, hy_cov

        BACKEND = "compiled"
    except ImportError:  # extension not built
        from ._fallback import enet_path, hy_contrast, hy_cov

        BACKEND = "python"
        logger.info("compiled kernels unavailable, using pure-Python fallback")

__all__ = ["BACKEND", "enet_path", "hy_contrast", "hy_cov"]
