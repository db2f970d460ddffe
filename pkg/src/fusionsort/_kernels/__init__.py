"""Backend selection for the hot kernels.

The compiled extension is preferred when it imported cleanly; the numpy
module is the fallback and the reference.  Setting FUSIONSORT_PURE_PYTHON=1
in the environment forces the fallback, which keeps both code paths
testable on one install.
"""

from __future__ import annotations

import os

from . import py_kernels

if os.environ.get("FUSIONSORT_PURE_PYTHON", "") == "1":
    _impl = py_kernels
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = py_kernels

BACKEND: str = _impl.BACKEND

conv2d_forward = _impl.conv2d_forward
conv2d_backward_input = _impl.conv2d_backward_input
conv2d_backward_weight = _impl.conv2d_backward_weight
ssm_scan_forward = _impl.ssm_scan_forward
ssm_scan_backward = _impl.ssm_scan_backward
dwconv1d_forward = _impl.dwconv1d_forward
dwconv1d_backward = _impl.dwconv1d_backward

__all__ = [
    "BACKEND",
    "conv2d_forward",
    "conv2d_backward_input",
    "conv2d_backward_weight",
    "ssm_scan_forward",
    "ssm_scan_backward",
    "dwconv1d_forward",
    "dwconv1d_backward",
    "py_kernels",
]
