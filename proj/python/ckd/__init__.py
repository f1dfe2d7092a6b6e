"""Causal kernel descent: attention-as-regression experiments."""

import json

from ._core import *  # noqa: F401,F403
from ._core import CkdError, __version__, _equivalence, _figure2, _spectral


def figure2(**config):
    """Averaged squared-error curve; returns (resolved config, mean, per-seed curves)."""
    echo, mean, per_seed = _figure2(json.dumps(config))
    return json.loads(echo), mean, per_seed


def equivalence(**config):
    return json.loads(_equivalence(json.dumps(config)))


def spectral(force_identity=False, rotation_grid=0, **config):
    return json.loads(_spectral(json.dumps(config), force_identity, rotation_grid))
