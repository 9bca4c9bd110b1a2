"""Two-layer graph convolutional network over QA graphs.

The per-epoch forward/backward kernels come from a compiled extension when it
is importable and fall back to numpy otherwise. Set ``QAGRAPH_BACKEND=numpy``
to force the fallback.
"""

import os

from qagraph.gcn import _kernels_py


def _load_kernels(choice: str | None = None):
    choice = (choice or os.environ.get("QAGRAPH_BACKEND", "auto")).lower()
    if choice == "numpy":
        return _kernels_py
    try:
        from qagraph.gcn import _kernels
    except ImportError:
        if choice == "cython":
            raise
        return _kernels_py
    return _kernels


kernels = _load_kernels()
BACKEND: str = kernels.BACKEND

from qagraph.gcn.model import (  # noqa: E402
    GcnModel,
    NormalizedAdjacency,
    ParameterCount,
    TrainConfig,
    TrainResult,
    TrainState,
    bce_loss,
    forward,
    gcn_layer,
    gradients,
    load_checkpoint,
    normalize_adjacency,
    parameter_count,
    predict,
    save_checkpoint,
    train,
)

__all__ = [
    "BACKEND",
    "GcnModel",
    "NormalizedAdjacency",
    "ParameterCount",
    "TrainConfig",
    "TrainResult",
    "TrainState",
    "bce_loss",
    "forward",
    "gcn_layer",
    "gradients",
    "kernels",
    "load_checkpoint",
    "normalize_adjacency",
    "parameter_count",
    "predict",
    "save_checkpoint",
    "train",
]
