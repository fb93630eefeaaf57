"""Finite-sample valid prediction sets for multinomial data with indirect information."""

from .core import (
    PredictionSet,
    conformal_set,
    direct_set,
    indirect_set,
    oracle_set,
    order_set_known_theta,
    set_pvalues,
)

__version__ = "0.1.0"
