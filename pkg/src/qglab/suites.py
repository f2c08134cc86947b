"""Built-in verification suites over named desk-scale instances."""

from __future__ import annotations

import time
from fractions import Fraction

import numpy as np

from .finiteqg import (
    antipode_flip_residual,
    build_function_algebra,
    build_group_algebra,
    coassociativity_residual,
    dual_qg,
    embed_cosubgroup,
    invariance_residuals,
    qg_match_report,
)
from .groups import affine_group, cyclic_group, direct_product, symmetric_group
from .linalg import op_norm, pentagon_residual
from .reports import CheckResult, ExperimentConfig, VerificationReport
from .rieffel import (
    build_crossed_product,
    comultiplication_compat_residual,
    duality_isomorphism,
    fixed_point_algebra,
    gamma_comultiplication,
    invariant_weight_check,
    slice_membership_report,
    theta_psi_group_law_residual,
)
from .twist import (
    Bicharacter,
    check_bicharacter,
    cocycle_identity_residual,
    haar_invariance_report,
    lift_cocycle,
    tilde_identity_residual,
    twisted_W,
    twisted_antipode,
    twisted_qg,
)

__all__ = ["list_suites", "run_suite", "SUITES"]


def _named_group(name: str):
    registry = {
        "Z2": lambda: cyclic_group(2),
        "Z3": lambda: cyclic_group(3),
        "Z4": lambda: cyclic_group(4),
        "Z2xZ2": lambda: direct_product(cyclic_group(2), cyclic_group(2)),
        "S3": lambda: symmetric_group(3),
        "AffF5": lambda: affine_group(5),
    }
    if name not in registry:
        raise ValueError(f"unknown group instance: {name}")
    return registry[name]()


def _twist_setup(instance: dict):
    gname = instance.get("group", "Z2xZ2")
    g = _named_group(gname)
    q = build_group_algebra(g)
    sub_name = instance.get("subgroup", "full")
    if sub_name == "full":
        sub = range(g.order)
    elif sub_name == "units":
        if gname != "AffF5":
            raise ValueError("'units' subgroup is defined for AffF5")
        sub = [(a - 1) * 5 for a in range(1, 5)]
    elif sub_name == "trivial":
        sub = [g.identity]
    else:
        raise ValueError(f"unknown subgroup spec: {sub_name}")
    cs = embed_cosubgroup(q, sub)
    psi_name = instance.get("bicharacter", "pairing")
    if psi_name == "pairing":
        psi = Bicharacter(cs.h_group, cs.h_group.pairing)
    elif psi_name == "trivial":
        psi = Bicharacter.trivial(cs.h_group)
    elif psi_name == "signAD":
        if cs.order != 4:
            raise ValueError("signAD needs the Z2xZ2 co-subgroup")
        psi = Bicharacter.from_function(
            cs.h_group, lambda i, j: (-1.0) ** ((i // 2) * (j % 2))
        )
    else:
        raise ValueError(f"unknown bicharacter spec: {psi_name}")
    return g, q, cs, psi


def run_finite_twist(cfg: ExperimentConfig) -> VerificationReport:
    tol = dict(cfg.tolerances)
    t_alg = float(tol.get("algebra", 1e-11))
    t_weight = float(tol.get("weight", 1e-10))
    g, q, cs, psi = _twist_setup(cfg.instance)
    checks = []
    checks.append(CheckResult("base-pentagon", "pentagon", pentagon_residual(q.w), t_alg))
    checks.append(
        CheckResult("base-coassociativity", "coassociativity", coassociativity_residual(q), t_alg)
    )
    li, ri = invariance_residuals(q)
    checks.append(CheckResult("base-left-invariance", "left-invariance", li, t_weight))
    checks.append(CheckResult("base-right-invariance", "right-invariance", ri, t_weight))
    checks.append(
        CheckResult("base-antipode-flip", "antipode-flip", antipode_flip_residual(q), t_alg)
    )
    checks.append(
        CheckResult("bicharacter", "bicharacter-multiplicativity", check_bicharacter(psi), 1e-12)
    )
    tw = lift_cocycle(cs, psi)
    checks.append(
        CheckResult("cocycle-identity", "two-cocycle-identity", cocycle_identity_residual(tw), t_alg)
    )
    checks.append(
        CheckResult("tilde-identity", "tilde-of-cocycle", tilde_identity_residual(tw), t_alg)
    )
    wrep = twisted_W(tw)
    checks.append(CheckResult("twisted-pentagon", "pentagon", wrep.pentagon, t_weight))
    checks.append(
        CheckResult("twisted-implements", "comultiplication-from-unitary", wrep.implements_delta, t_weight)
    )
    checks.append(CheckResult("twisted-star-formula", "twisted-unitary-adjoint", wrep.star_formula, t_alg))
    checks.append(
        CheckResult(
            "twisted-coassociativity",
            "coassociativity",
            coassociativity_residual(q, omega=tw.omega),
            t_weight,
        )
    )
    ar = twisted_antipode(tw)
    checks.append(CheckResult("twisted-antipode-flip", "antipode-flip", ar.flip_residual, t_weight))
    checks.append(
        CheckResult("twisted-antipode-involutive", "antipode-involution", ar.involution_residual, t_alg)
    )
    hr = haar_invariance_report(tw)
    checks.append(CheckResult("twisted-left-invariance", "left-invariance", hr.left, t_weight))
    checks.append(CheckResult("twisted-right-invariance", "right-invariance", hr.right, t_weight))
    checks.append(
        CheckResult(
            "modular-element",
            "modular-element-undeformed",
            op_norm(tw.modular_element() - q.delta_mod),
            1e-15,
        )
    )
    # slice span of the twisted unitary equals the algebra
    d = q.hilbert_dim
    slices = wrep.w_omega.data.reshape(d, d, d, d).transpose(1, 3, 0, 2).reshape(d * d, d * d)
    rank = int(
        (np.linalg.svd(slices, compute_uv=False) > 1e-9 * np.linalg.norm(slices, 2)).sum()
    )
    checks.append(
        CheckResult("slice-span", "slice-algebra-dimension", abs(rank - q.algebra_dim), 0.5)
    )
    name = f"{cfg.instance.get('group', 'Z2xZ2')}/{cfg.instance.get('subgroup', 'full')}/{cfg.instance.get('bicharacter', 'pairing')}"
    return VerificationReport("finite-twist", name, checks, seed=cfg.seed)


def run_duality(cfg: ExperimentConfig) -> VerificationReport:
    tol = float(cfg.tolerances.get("duality", 1e-10))
    gname = cfg.instance.get("group", "Z3")
    g = _named_group(gname)
    fn = build_function_algebra(g)
    gr = build_group_algebra(g)
    du = dual_qg(fn)
    rep = qg_match_report(du, gr)
    bid = dual_qg(du)
    rep2 = qg_match_report(bid, fn)
    checks = [
        CheckResult("dual-span", "dual-is-group-algebra", rep["span"], tol),
        CheckResult("dual-w", "dual-unitary-match", rep["w"], tol),
        CheckResult("dual-delta", "dual-comultiplication-match", rep["delta_on_basis"], tol),
        CheckResult("bidual-span", "bidual-is-original", rep2["span"], tol),
        CheckResult("bidual-weight", "bidual-weight-match", rep2["weight_normalized"], tol),
    ]
    return VerificationReport("duality", gname, checks, seed=cfg.seed)


def run_rieffel(cfg: ExperimentConfig) -> VerificationReport:
    tol = dict(cfg.tolerances)
    t_law = float(tol.get("group_law", 1e-11))
    t_iso = float(tol.get("iso", 1e-10))
    t_weight = float(tol.get("weight", 1e-9))
    g, q, cs, psi = _twist_setup(cfg.instance)
    qhat = dual_qg(q)
    cp = build_crossed_product(qhat, cs)
    checks = [
        CheckResult("covariance", "crossed-product-covariance", cp.covariance_residual, t_law),
        CheckResult("dual-action", "dual-action-on-generators", cp.dual_action_residual, t_law),
        CheckResult(
            "group-law",
            "twisted-dual-action-group-law",
            theta_psi_group_law_residual(cp, psi, seed=cfg.seed + 5),
            t_law,
        ),
    ]
    tw = lift_cocycle(cs, psi)
    fp = fixed_point_algebra(cp, psi)
    checks.append(
        CheckResult("fixed-point-dim", "fixed-point-dimension", abs(fp.dim - qhat.algebra_dim), 0.5)
    )
    checks.append(
        CheckResult("fixed-point-invariance", "fixed-point-invariance", fp.invariance_residual, t_law)
    )
    wrep = twisted_W(tw)
    tq = twisted_qg(tw, wrep)
    tdual = dual_qg(tq)
    iso = duality_isomorphism(
        fp, tw, w_rep=wrep, twisted=tq, twisted_dual=tdual, seed=cfg.seed + 23
    )
    checks.append(
        CheckResult("iso-generators", "duality-isomorphism-on-slices", iso.generator_residual, t_iso)
    )
    checks.append(
        CheckResult("iso-intertwines", "action-intertwining", iso.intertwining_residual, t_iso)
    )
    gamma = gamma_comultiplication(cp)
    checks.append(
        CheckResult(
            "comultiplication-compat",
            "comultiplication-transport",
            comultiplication_compat_residual(iso, fp, gamma),
            t_iso,
        )
    )
    iw = invariant_weight_check(iso, fp)
    checks.append(
        CheckResult("weight-uniqueness", "invariant-functional-unique", abs(iw.nullspace_dim - 1), 0.5)
    )
    checks.append(CheckResult("weight-match", "invariant-weight-match", iw.match_residual, t_weight))
    slices = slice_membership_report(fp, tw)
    checks.append(
        CheckResult("slice-invariance", "slices-are-fixed-points", slices["invariance"], t_law)
    )
    checks.append(
        CheckResult(
            "slice-generation",
            "fixed-points-generated-by-slices",
            abs(slices["slice_span_dim"] - fp.dim),
            0.5,
        )
    )
    name = f"{cfg.instance.get('group', 'Z2xZ2')}/{cfg.instance.get('subgroup', 'full')}/{cfg.instance.get('bicharacter', 'pairing')}"
    return VerificationReport("rieffel-duality", name, checks, seed=cfg.seed)


def run_azb_symbolic(cfg: ExperimentConfig) -> VerificationReport:
    from .azb.symbolic import (
        AzbElement,
        AzbMonomial,
        AzbPoly,
        QScalar,
        azb_generators,
        gns_inner,
        gns_lambda,
        haar_phi,
        modular_data,
        twist_azb,
    )

    q = float(cfg.instance.get("q", 0.5))
    x_param = int(cfg.instance.get("x", 1))
    rng = np.random.default_rng(cfg.seed)
    gen = azb_generators()
    a, b, u, v = gen["a"], gen["b"], gen["u"], gen["v"]
    abs_a, abs_b = gen["abs_a"], gen["abs_b"]
    poly = lambda *m: AzbPoly(m)
    scale_q = lambda p, k: AzbPoly([mm.scale(QScalar(1.0, Fraction(k), Fraction(0))) for mm in p.monomials()])
    rel = [
        ("rel-ab", poly(a * b), scale_q(poly(b * a), 2)),
        ("rel-ab-star", poly(a * b.star()), poly(b.star() * a)),
        ("rel-uv", poly(u * v), poly(v * u)),
        ("rel-u-absa", poly(u * abs_a), poly(abs_a * u)),
        ("rel-v-absb", poly(v * abs_b), poly(abs_b * v)),
        ("rel-u-absb", poly(u * abs_b), scale_q(poly(abs_b * u), 1)),
        ("rel-absa-v", poly(abs_a * v), scale_q(poly(v * abs_a), 1)),
    ]
    checks = []
    for cid, lhs, rhs in rel:
        checks.append(
            CheckResult(cid, "generator-relation", 0.0 if lhs.equals(rhs) else 1.0, 0.5)
        )
    phi_val = haar_phi(AzbElement.indicator(q, 0, 0, 0, 1))
    checks.append(CheckResult("haar-value", "haar-functional-value", abs(phi_val - q * q), 1e-15))
    worst = 0.0
    for _ in range(100):
        z = AzbElement.random(q, rng)
        lam = gns_lambda(z)
        n1 = gns_inner(lam, lam)
        n2 = haar_phi(z.star() @ z)
        worst = max(worst, abs(n1 - n2) / max(1.0, abs(n1)))
    checks.append(CheckResult("gns-pairing", "gns-inner-product", worst, 1e-12))
    tw = twist_azb(x_param, q)
    dm = tw.modular_element()
    checks.append(
        CheckResult(
            "modular-exponent",
            "twisted-modular-element",
            abs(dm.pa[0] - (4 * x_param + 2)) + abs(dm.pa[1]),
            1e-15,
        )
    )
    rn = tw.rn_cocycle(Fraction(3, 7))
    checks.append(
        CheckResult(
            "cocycle-exponent",
            "radon-nikodym-cocycle",
            abs(rn.pa[1] - Fraction(-2 * x_param * 3, 7)) + abs(rn.pa[0]),
            1e-15,
        )
    )
    checks.append(
        CheckResult(
            "cocycle-law",
            "cocycle-chain-rule",
            0.0 if tw.rn_cocycle_law_holds(Fraction(1, 3), Fraction(2, 5)) else 1.0,
            0.5,
        )
    )
    checks.append(
        CheckResult(
            "coassociativity-b",
            "coassociativity",
            0.0 if tw.coassociativity_on_b_holds() else 1.0,
            0.5,
        )
    )
    lattices = {xp: abs(4 * xp + 2) for xp in (0, 1, 2)}
    distinct = len(set(lattices.values())) == 3 and (4 * 1 + 2) != (4 * 1 - 2)
    checks.append(
        CheckResult("non-isomorphism", "modular-spectrum-witness", 0.0 if distinct else 1.0, 0.5)
    )
    checks.append(
        CheckResult("psi-antisymmetric", "bicharacter-antisymmetry", tw.antisymmetry_residual(), 1e-12)
    )
    return VerificationReport("azb-symbolic", f"q={q},x={x_param}", checks, seed=cfg.seed)


def run_azb_numeric(cfg: ExperimentConfig) -> VerificationReport:
    from .azb.symbolic import AzbElement
    from .azb.truncated import (
        build_truncated,
        build_W,
        delta_a_band_report,
        element_matrix_oracle,
        pentagon_band_report,
        twisted_numeric_check,
        unitarity_band_report,
        band_basis_vector,
    )

    q = float(cfg.instance.get("q", 0.5))
    n = int(cfg.instance.get("N", 16))
    x_param = int(cfg.instance.get("x", 1))
    band = cfg.instance.get("band")
    probes = int(cfg.instance.get("probes", 3))
    rep = build_truncated(n, q, band=band)
    w = build_W(rep)
    tol = dict(cfg.tolerances)
    checks = []
    u = unitarity_band_report(rep, w, probes=probes, seed=cfg.seed + 3)
    checks.append(CheckResult("unitarity", "unitary-on-band", u.residual, float(tol.get("unitarity", 1e-6))))
    da = delta_a_band_report(rep, w, probes=probes, seed=cfg.seed + 5)
    checks.append(
        CheckResult("delta-a", "comultiplication-of-a", da.residual, float(tol.get("delta_a", 1e-5)))
    )
    tw = twisted_numeric_check(rep, x_param, probes=probes, seed=cfg.seed + 7)
    checks.append(
        CheckResult(
            "omega-conj-left", "twist-conjugation", tw["conj_b_tensor_1"], float(tol.get("omega", 1e-5))
        )
    )
    checks.append(
        CheckResult(
            "omega-conj-right", "twist-conjugation", tw["conj_1_tensor_b"], float(tol.get("omega", 1e-5))
        )
    )
    checks.append(
        CheckResult(
            "omega-cocycle", "two-cocycle-identity", tw["cocycle_identity"], float(tol.get("cocycle", 1e-6))
        )
    )
    p = pentagon_band_report(rep, w, probes=probes, seed=cfg.seed + 11)
    checks.append(
        CheckResult("pentagon-band", "pentagon", p.residual, float(tol.get("pentagon", 1e-4)))
    )
    # cross oracle: symbolic products against the matrix representation
    rng = np.random.default_rng(cfg.seed + 13)
    worst = 0.0
    lo, hi = -n // 2 + rep.band, n // 2 - rep.band
    for _ in range(int(cfg.instance.get("oracle_products", 10))):
        e1 = AzbElement.random(q, rng, n_terms=2, span=1)
        e2 = AzbElement.random(q, rng, n_terms=2, span=1)
        vec = band_basis_vector(rep, rng.integers(lo, hi, size=4))
        lhs = element_matrix_oracle(rep, e1 @ e2, vec)
        rhs = element_matrix_oracle(rep, e1, element_matrix_oracle(rep, e2, vec))
        worst = max(worst, (lhs - rhs).norm())
    checks.append(
        CheckResult("cross-oracle", "symbolic-vs-matrix", worst, float(tol.get("oracle", 1e-8)))
    )
    return VerificationReport("azb-numeric", f"q={q},N={n},x={x_param}", checks, seed=cfg.seed)


SUITES = {
    "finite-twist": (run_finite_twist, "finite engines, cocycle lift and the twisted quantum group"),
    "duality": (run_duality, "dual and bidual of the finite engines"),
    "rieffel-duality": (run_rieffel, "crossed product, fixed points and the duality isomorphism"),
    "azb-symbolic": (run_azb_symbolic, "exact generator algebra and its integer twists"),
    "azb-numeric": (run_azb_numeric, "cyclic truncation residuals on the interior band"),
}


def list_suites() -> dict:
    return {name: desc for name, (_, desc) in SUITES.items()}


def run_suite(cfg: ExperimentConfig) -> VerificationReport:
    if cfg.suite not in SUITES:
        raise ValueError(f"unknown suite: {cfg.suite!r}; known: {sorted(SUITES)}")
    runner, _ = SUITES[cfg.suite]
    t0 = time.perf_counter()
    report = runner(cfg)
    report.wall_time_s = time.perf_counter() - t0
    return report
