"""Quantum az+b laboratory: exact symbolic algebra and cyclic truncations."""

from .symbolic import (
    AzbElement,
    AzbMonomial,
    AzbPoly,
    QScalar,
    TwistedAzb,
    azb_generators,
    haar_phi,
    gns_lambda,
    gns_inner,
    modular_data,
    twist_azb,
)
from .truncated import (
    TruncatedRep,
    build_truncated,
    qexp,
    qexp_op,
    chi_op,
    build_W,
    twisted_numeric_check,
    element_matrix_oracle,
)

__all__ = [
    "AzbElement",
    "AzbMonomial",
    "AzbPoly",
    "QScalar",
    "TwistedAzb",
    "azb_generators",
    "haar_phi",
    "gns_lambda",
    "gns_inner",
    "modular_data",
    "twist_azb",
    "TruncatedRep",
    "build_truncated",
    "qexp",
    "qexp_op",
    "chi_op",
    "build_W",
    "twisted_numeric_check",
    "element_matrix_oracle",
]
