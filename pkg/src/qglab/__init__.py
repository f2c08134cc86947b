"""Desk-scale verification lab for twisted and Rieffel-deformed quantum groups.

Exact finite-dimensional engines for function and group algebras of finite
groups, their duals, cocycle twists along abelian co-subgroups, the crossed
product / fixed-point deformation dual to twisting, and an exact-plus-
truncated model of the q-deformed az+b generators.
"""

from .groups import (
    FiniteGroupData,
    affine_group,
    cyclic_group,
    direct_product,
    group_from_json,
    subgroup_from_elements,
    symmetric_group,
)
from .linalg import (
    AntiUnitary,
    FactoredOperator,
    LegOperator,
    PolarData,
    QCommutingPair,
    check_q_commuting,
    dft,
    dump_operator,
    flip_operator,
    frobenius,
    functional_calculus,
    leg_embed,
    load_operator,
    op_norm,
    pentagon_residual,
    polar,
    tensor,
)
from .finiteqg import (
    CoSubgroup,
    QuantumGroupData,
    build_function_algebra,
    build_group_algebra,
    coassociativity_residual,
    dual_qg,
    embed_cosubgroup,
    gns_standard_form,
    invariance_residuals,
    left_right_unitaries,
)
from .twist import (
    Bicharacter,
    TwistData,
    check_bicharacter,
    connes_cocycle,
    haar_invariance_report,
    lift_cocycle,
    tilde_transform,
    twist_delta,
    twisted_W,
    twisted_antipode,
    vaes_weight,
)
from .rieffel import (
    CrossedProduct,
    FixedPointAlgebra,
    build_crossed_product,
    duality_isomorphism,
    fixed_point_algebra,
    gamma_comultiplication,
    invariant_weight_check,
    twisted_dual_action,
)
from .reports import ExperimentConfig, VerificationReport, emit
from .suites import list_suites, run_suite

__version__ = "0.1.0"
