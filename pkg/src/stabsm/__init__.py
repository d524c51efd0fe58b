"""Stabilizer codes under Pauli noise, mapped to classical replica spin models."""

from .channels import builtin_channel, channel_for_code, mu, p_from_mu
from .codes import builtin, logicals
from .smgen import SMModel, listing, reduce_species, replica_model

__version__ = "0.1.0"

__all__ = [
    "SMModel",
    "builtin",
    "builtin_channel",
    "channel_for_code",
    "listing",
    "logicals",
    "mu",
    "p_from_mu",
    "reduce_species",
    "replica_model",
]
