"""Input checking shared by the estimators and the CLI."""

from __future__ import annotations

import os

import numpy as np
from sklearn.utils.validation import check_array

from .netir import FunctionNetwork, load_network, parse_network


def check_network(network) -> FunctionNetwork:
    """Coerce a network, DSL source text or path to a validated network."""
    if isinstance(network, FunctionNetwork):
        return network
    if isinstance(network, os.PathLike):
        return load_network(network)
    if isinstance(network, str):
        if "\n" not in network and os.path.isfile(network):
            return load_network(network)
        return parse_network(network)
    raise TypeError(
        f"expected a FunctionNetwork, DSL text or a path, got {type(network).__name__}"
    )


def check_input_points(X, net: FunctionNetwork) -> np.ndarray:
    """2-D float array with one column per network input, finite values only."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_all_finite=True)
    if X.shape[1] != len(net.inputs):
        raise ValueError(
            f"X has {X.shape[1]} features, but the network has {len(net.inputs)} inputs "
            f"{list(net.inputs)}"
        )
    return X
