"""Exact symbolic algebra of the quantum az+b generators.

Two layers:

* monomials ``c |a|^pa |b|^pb v^k u^l`` with exact rational (possibly
  complex-rational) exponents -- the commutation relations move only
  q-power phases around, so generator identities, the deformed
  comultiplication, the modular element and Radon-Nikodym cocycles are
  integer/rational exponent identities, never float comparisons;

* finitely supported elements ``sum f_{k,l}(|a|, |b|) v^k u^l`` with the
  coefficient functions stored on the q^Z x q^Z lattice -- these carry the
  Haar functional, the GNS map and the modular operators.

Scalars are ``c * q^(qpow + i*qphase)`` with exact Fractions in the
exponents; ``q`` itself stays symbolic until a float is requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

__all__ = [
    "QScalar",
    "AzbMonomial",
    "AzbPoly",
    "AzbElement",
    "TwistedAzb",
    "azb_generators",
    "haar_phi",
    "gns_lambda",
    "gns_inner",
    "modular_data",
    "twist_azb",
]


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class QScalar:
    """Exact scalar c * q^(qpow) * q^(i*qphase)."""

    c: complex = 1.0
    qpow: Fraction = Fraction(0)
    qphase: Fraction = Fraction(0)

    def __mul__(self, other: "QScalar") -> "QScalar":
        return QScalar(self.c * other.c, self.qpow + other.qpow, self.qphase + other.qphase)

    def conj(self) -> "QScalar":
        return QScalar(np.conj(self.c), self.qpow, -self.qphase)

    def scale(self, z: complex) -> "QScalar":
        return QScalar(self.c * z, self.qpow, self.qphase)

    def value(self, q: float) -> complex:
        return self.c * (q ** float(self.qpow)) * np.exp(1j * math.log(q) * float(self.qphase))

    def is_zero(self) -> bool:
        return self.c == 0

    def equals(self, other: "QScalar") -> bool:
        if self.is_zero() and other.is_zero():
            return True
        return (
            abs(self.c - other.c) < 1e-14
            and self.qpow == other.qpow
            and self.qphase == other.qphase
        )


@dataclass(frozen=True)
class AzbMonomial:
    """c |a|^(pa) |b|^(pb) v^k u^l in normal order.

    Exponents are complex rationals (re, im) so powers like |a|^{-2ixt}
    stay exact; k and l are integers.
    """

    coeff: QScalar = QScalar()
    pa: tuple[Fraction, Fraction] = (Fraction(0), Fraction(0))
    pb: tuple[Fraction, Fraction] = (Fraction(0), Fraction(0))
    k: int = 0
    l: int = 0

    @staticmethod
    def make(c=1.0, pa=0, pb=0, k=0, l=0, pa_im=0, pb_im=0, qpow=0, qphase=0) -> "AzbMonomial":
        return AzbMonomial(
            QScalar(c, _frac(qpow), _frac(qphase)),
            (_frac(pa), _frac(pa_im)),
            (_frac(pb), _frac(pb_im)),
            int(k),
            int(l),
        )

    def key(self):
        return (self.pa, self.pb, self.k, self.l)

    def __mul__(self, other: "AzbMonomial") -> "AzbMonomial":
        # move v^k u^l across |a|^pa' |b|^pb': u^l |b|^p = q^(l p) |b|^p u^l,
        # v^k |a|^p = q^(-k p) |a|^p v^k; u, v commute with everything else.
        extra_re = self.l * other.pb[0] - self.k * other.pa[0]
        extra_im = self.l * other.pb[1] - self.k * other.pa[1]
        coeff = self.coeff * other.coeff * QScalar(1.0, extra_re, extra_im)
        return AzbMonomial(
            coeff,
            (self.pa[0] + other.pa[0], self.pa[1] + other.pa[1]),
            (self.pb[0] + other.pb[0], self.pb[1] + other.pb[1]),
            self.k + other.k,
            self.l + other.l,
        )

    def star(self) -> "AzbMonomial":
        # (c A v^k u^l)^* = conj(c) u^{-l} v^{-k} A^*; normal ordering the
        # phases gives q^(k conj(pa) - l conj(pb)).
        pa_c = (self.pa[0], -self.pa[1])
        pb_c = (self.pb[0], -self.pb[1])
        extra_re = self.k * pa_c[0] - self.l * pb_c[0]
        extra_im = self.k * pa_c[1] - self.l * pb_c[1]
        coeff = self.coeff.conj() * QScalar(1.0, extra_re, extra_im)
        return AzbMonomial(coeff, pa_c, pb_c, -self.k, -self.l)

    def scale(self, s: QScalar) -> "AzbMonomial":
        return AzbMonomial(self.coeff * s, self.pa, self.pb, self.k, self.l)


class AzbPoly:
    """Finite sum of monomials with exact collection of like terms."""

    def __init__(self, monomials: Iterable[AzbMonomial] = ()):
        self.terms: dict = {}
        for m in monomials:
            self._add(m)

    def _add(self, m: AzbMonomial):
        k = m.key()
        if k in self.terms:
            cur = self.terms[k]
            if cur.coeff.qpow == m.coeff.qpow and cur.coeff.qphase == m.coeff.qphase:
                merged = AzbMonomial(
                    QScalar(cur.coeff.c + m.coeff.c, cur.coeff.qpow, cur.coeff.qphase),
                    m.pa,
                    m.pb,
                    m.k,
                    m.l,
                )
                if merged.coeff.c == 0:
                    del self.terms[k]
                else:
                    self.terms[k] = merged
                return
            # different exact q-powers: store separately under an extended key
            self.terms[(k, m.coeff.qpow, m.coeff.qphase)] = m
            return
        self.terms[k] = m

    def monomials(self) -> list[AzbMonomial]:
        return list(self.terms.values())

    def __mul__(self, other: "AzbPoly") -> "AzbPoly":
        return AzbPoly(a * b for a in self.monomials() for b in other.monomials())

    def __add__(self, other: "AzbPoly") -> "AzbPoly":
        return AzbPoly(self.monomials() + other.monomials())

    def __sub__(self, other: "AzbPoly") -> "AzbPoly":
        return AzbPoly(self.monomials() + [m.scale(QScalar(-1.0)) for m in other.monomials()])

    def star(self) -> "AzbPoly":
        return AzbPoly(m.star() for m in self.monomials())

    def is_zero(self) -> bool:
        return all(m.coeff.is_zero() for m in self.monomials())

    def equals(self, other: "AzbPoly") -> bool:
        return (self - other).is_zero()


def azb_generators() -> dict:
    """The seven symbolic generators: a, b, u, v, |a|, |b| and 1."""
    return {
        "one": AzbMonomial.make(),
        "a": AzbMonomial.make(pa=1, l=1),
        "b": AzbMonomial.make(pb=1, k=1),
        "u": AzbMonomial.make(l=1),
        "v": AzbMonomial.make(k=1),
        "abs_a": AzbMonomial.make(pa=1),
        "abs_b": AzbMonomial.make(pb=1),
    }


# ---------------------------------------------------------------------------
# finitely supported elements


class AzbElement:
    """sum over (k, l) of f_{k,l}(|a|, |b|) v^k u^l with finite support.

    ``terms[(k, l)][(i, j)]`` is the value f_{k,l}(q^i, q^j).
    """

    def __init__(self, q: float, terms: dict | None = None):
        if not (0 < q < 1):
            raise ValueError("q must lie in (0, 1)")
        self.q = float(q)
        self.terms: dict = {}
        if terms:
            for kl, fun in terms.items():
                clean = {ij: complex(vv) for ij, vv in fun.items() if vv != 0}
                if clean:
                    self.terms[tuple(kl)] = clean

    @staticmethod
    def indicator(q: float, k: int, l: int, i: int, j: int, value: complex = 1.0) -> "AzbElement":
        return AzbElement(q, {(k, l): {(i, j): value}})

    @staticmethod
    def one(q: float) -> "AzbElement":
        raise NotImplementedError(
            "the constant function 1 is not finitely supported on the q-lattice"
        )

    @staticmethod
    def random(q: float, rng: np.random.Generator, n_terms: int = 3, span: int = 2) -> "AzbElement":
        terms: dict = {}
        for _ in range(n_terms):
            k, l = int(rng.integers(-span, span + 1)), int(rng.integers(-span, span + 1))
            fun = terms.setdefault((k, l), {})
            for _ in range(int(rng.integers(1, 4))):
                ij = (int(rng.integers(-span, span + 1)), int(rng.integers(-span, span + 1)))
                fun[ij] = complex(rng.standard_normal(), rng.standard_normal())
        return AzbElement(q, terms)

    def support_radius(self) -> int:
        r = 0
        for (k, l), fun in self.terms.items():
            r = max(r, abs(k), abs(l))
            for i, j in fun:
                r = max(r, abs(i), abs(j))
        return r

    def __add__(self, other: "AzbElement") -> "AzbElement":
        self._check(other)
        out = {kl: dict(fun) for kl, fun in self.terms.items()}
        for kl, fun in other.terms.items():
            tgt = out.setdefault(kl, {})
            for ij, vv in fun.items():
                tgt[ij] = tgt.get(ij, 0.0) + vv
        return AzbElement(self.q, out)

    def __sub__(self, other: "AzbElement") -> "AzbElement":
        return self + other.scale(-1.0)

    def scale(self, z: complex) -> "AzbElement":
        return AzbElement(
            self.q,
            {kl: {ij: z * vv for ij, vv in fun.items()} for kl, fun in self.terms.items()},
        )

    def _check(self, other: "AzbElement"):
        if abs(self.q - other.q) > 0:
            raise ValueError("q mismatch between elements")

    def __matmul__(self, other: "AzbElement") -> "AzbElement":
        """Product: moving v^k u^l across g rescales |a| by q^{-k}, |b| by q^l."""
        self._check(other)
        out: dict = {}
        for (k, l), f in self.terms.items():
            for (kp, lp), g in other.terms.items():
                tgt = out.setdefault((k + kp, l + lp), {})
                for (i, j), fv in f.items():
                    for (ip, jp), gv in g.items():
                        # product supported where (ip, jp) = (i - k, j + l)
                        if ip == i - k and jp == j + l:
                            tgt[(i, j)] = tgt.get((i, j), 0.0) + fv * gv
        return AzbElement(self.q, out)

    def star(self) -> "AzbElement":
        """(f v^k u^l)^* = h v^{-k} u^{-l} with h(q^i, q^j) = conj f(q^{i+k}, q^{j-l})."""
        out: dict = {}
        for (k, l), f in self.terms.items():
            tgt = out.setdefault((-k, -l), {})
            for (i, j), fv in f.items():
                tgt[(i - k, j + l)] = tgt.get((i - k, j + l), 0.0) + np.conj(fv)
        return AzbElement(self.q, out)

    def norm_max(self) -> float:
        return max(
            (abs(vv) for fun in self.terms.values() for vv in fun.values()), default=0.0
        )

    def coefficient(self, k: int, l: int, i: int, j: int) -> complex:
        return self.terms.get((k, l), {}).get((i, j), 0.0)


def haar_phi(x: AzbElement) -> complex:
    """phi(x) = sum over (i, j) of q^(2(j - i)) f_{0,0}(q^i, q^j)."""
    total = 0.0 + 0.0j
    for (i, j), vv in x.terms.get((0, 0), {}).items():
        total += (x.q ** (2 * (j - i))) * vv
    return complex(total)


def gns_lambda(x: AzbElement) -> dict:
    """Lambda(x) as a finitely supported vector on (i, j, k, l).

    Lambda(x) = sum q^(k+l) xi_{k,l} (x) e_k (x) e_l with
    xi_{k,l}(i, j) = q^(j-i) f_{k,l}(q^i, q^j).
    """
    q = x.q
    vec: dict = {}
    for (k, l), fun in x.terms.items():
        for (i, j), vv in fun.items():
            vec[(i, j, k, l)] = vec.get((i, j, k, l), 0.0) + (q ** (k + l)) * (q ** (j - i)) * vv
    return {idx: v for idx, v in vec.items() if v != 0}


def gns_inner(v1: dict, v2: dict) -> complex:
    """<v1, v2>, linear in the first argument."""
    keys = set(v1) & set(v2)
    return complex(sum(v1[k] * np.conj(v2[k]) for k in keys))


@dataclass(frozen=True)
class ModularData:
    """J, nabla, sigma_t and the modular element of the Haar weight."""

    q: float

    def j_apply(self, vec: dict) -> dict:
        out: dict = {}
        for (r, s, k, l), vv in vec.items():
            idx = (r - k, s + l, -k, -l)
            out[idx] = out.get(idx, 0.0) + np.conj(vv)
        return out

    def nabla_power(self, vec: dict, t: float) -> dict:
        """nabla^t: multiplies (r, s, k, l) by q^(-2 t (k + l))."""
        return {idx: vv * (self.q ** (-2 * t * (idx[2] + idx[3]))) for idx, vv in vec.items()}

    def sigma_t(self, x: AzbElement, t: float) -> AzbElement:
        """sigma_t multiplies a v^k u^l term by q^(-2 i t (k + l))."""
        phase = lambda k, l: np.exp(-2j * t * (k + l) * math.log(x.q))
        return AzbElement(
            x.q,
            {
                (k, l): {ij: vv * phase(k, l) for ij, vv in fun.items()}
                for (k, l), fun in x.terms.items()
            },
        )

    def sigma_monomial(self, m: AzbMonomial, t) -> AzbMonomial:
        tq = _frac(t)
        return m.scale(QScalar(1.0, Fraction(0), -2 * tq * (m.k + m.l)))

    def delta(self) -> AzbMonomial:
        return AzbMonomial.make(pa=2)

    @property
    def antipode(self):
        raise NotImplementedError(
            "the antipode on generators is not pinned down here; it is "
            "recorded as not implemented rather than guessed"
        )


def modular_data(q: float) -> ModularData:
    return ModularData(float(q))


# ---------------------------------------------------------------------------
# twisting


def _ad_omega(mono: AzbMonomial, x: int, side: str) -> tuple[AzbMonomial, AzbMonomial]:
    """Ad(Omega_x) of mono (x) 1 (side='left') or 1 (x) mono (side='right').

    Conjugation rules: v (x) 1 -> v (x) u^x, |b| (x) 1 -> |b| (x) |a|^{-x};
    1 (x) v -> u^{-x} (x) v, 1 (x) |b| -> |a|^{x} (x) |b|; u and |a| legs
    are fixed.  Returns the (left, right) monomial pair.
    """
    if side == "left":
        partner = AzbMonomial.make(pa=Fraction(-x) * mono.pb[0], pa_im=Fraction(-x) * mono.pb[1],
                                   l=x * mono.k)
        return mono, partner
    partner = AzbMonomial.make(pa=Fraction(x) * mono.pb[0], pa_im=Fraction(x) * mono.pb[1],
                               l=-x * mono.k)
    return partner, mono


@dataclass
class TwistedAzb:
    """Twist of the quantum az+b algebra by the integer-parameter bicharacter."""

    x: int
    q: float

    def psi(self, k1, phi1, k2, phi2) -> complex:
        """Psi_x(q^(k1 + i phi1), q^(k2 + i phi2)) = q^(i x (k1 phi2 - k2 phi1))."""
        return np.exp(1j * self.x * (k1 * phi2 - k2 * phi1) * math.log(self.q))

    def antisymmetry_residual(self, samples: int = 20, seed: int = 2) -> float:
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(samples):
            k1, k2 = rng.integers(-3, 4, size=2)
            p1, p2 = rng.standard_normal(2)
            worst = max(
                worst, abs(self.psi(k1, p1, k2, p2) - np.conj(self.psi(k2, p2, k1, p1)))
            )
        return float(worst)

    def delta_x_a(self) -> list[tuple[AzbMonomial, AzbMonomial]]:
        a = azb_generators()["a"]
        return [(a, a)]

    def delta_x_b(self) -> list[tuple[AzbMonomial, AzbMonomial]]:
        """Two-term deformed coproduct of b, derived from the Omega conjugation.

        Delta_x(b) = Ad(Omega_x)(a (x) b) + Ad(Omega_x)(b (x) 1).
        """
        g = azb_generators()
        a, b, one = g["a"], g["b"], g["one"]
        l1a, r1a = _ad_omega(a, self.x, "left")
        l1b, r1b = _ad_omega(b, self.x, "right")
        term1 = (l1a * l1b, r1a * r1b)
        term2 = _ad_omega(b, self.x, "left")
        return [term1, term2]

    def delta_x_on_group_like(self, mono: AzbMonomial) -> tuple[AzbMonomial, AzbMonomial]:
        """Delta_x(u^m |a|^p) = (u^m |a|^p) (x) (u^m |a|^p)."""
        if mono.pb != (Fraction(0), Fraction(0)) or mono.k != 0:
            raise ValueError("only monomials in u and |a| are group-like")
        return (mono, mono)

    def modular_element(self) -> AzbMonomial:
        """delta_x = |a|^(4x + 2) = delta A_x^{-1} B_x."""
        return AzbMonomial.make(pa=4 * self.x + 2)

    def a_operator(self) -> AzbMonomial:
        """A_x with A_x^{it} = Psi_x(a, gamma_t^{-1}) = |a|^{-2ixt}."""
        return AzbMonomial.make(pa=-2 * self.x)

    def b_operator(self) -> AzbMonomial:
        return AzbMonomial.make(pa=2 * self.x)

    def rn_cocycle(self, t) -> AzbMonomial:
        """[D phi_x : D phi]_t = |a|^{-2ixt} (an exact imaginary exponent)."""
        return AzbMonomial.make(pa=0, pa_im=Fraction(-2 * self.x) * _frac(t))

    def rn_cocycle_law_holds(self, t, s) -> bool:
        """u_{t+s} = u_t sigma_t(u_s); |a| is sigma-fixed so this is exact."""
        md = modular_data(self.q)
        lhs = self.rn_cocycle(_frac(t) + _frac(s))
        rhs = self.rn_cocycle(t) * md.sigma_monomial(self.rn_cocycle(s), t)
        return AzbPoly([lhs]).equals(AzbPoly([rhs]))

    def coassociativity_on_b_holds(self) -> bool:
        """(Delta_x (x) id)Delta_x(b) = (id (x) Delta_x)Delta_x(b), exactly.

        Expands both sides into triples of monomials through group-likeness
        of the u^m |a|^p factors and compares the formal sums.
        """
        terms = self.delta_x_b()
        lhs: list[tuple[AzbMonomial, AzbMonomial, AzbMonomial]] = []
        for left, right in terms:
            if _is_ua_monomial(left):
                g1, g2 = self.delta_x_on_group_like(left)
                lhs.append((g1, g2, right))
            else:
                for l2, r2 in self.delta_x_b():
                    lhs.append((l2.scale(left.coeff), r2, right))
        rhs: list[tuple[AzbMonomial, AzbMonomial, AzbMonomial]] = []
        for left, right in terms:
            if _is_ua_monomial(right):
                g1, g2 = self.delta_x_on_group_like(right)
                rhs.append((left, g1, g2))
            else:
                for l2, r2 in self.delta_x_b():
                    rhs.append((left, l2.scale(right.coeff), r2))
        return _triple_sets_equal(lhs, rhs)

    @property
    def dual_relations(self) -> dict:
        """Expected dual-side relations, recorded as metadata only."""
        return {
            "beta_beta_star": f"beta-hat beta-hat^* = q^(-4x) beta-hat^* beta-hat (p = q^{-4 * self.x})",
            "alpha_beta": "alpha-hat beta-hat = q^2 beta-hat alpha-hat",
        }

    @property
    def antipode(self):
        raise NotImplementedError("antipode of the twist is recorded as not implemented")


def _is_ua_monomial(m: AzbMonomial) -> bool:
    return m.pb == (Fraction(0), Fraction(0)) and m.k == 0


def _triple_sets_equal(lhs, rhs) -> bool:
    def normalize(triples):
        out = {}
        for t in triples:
            key = tuple(m.key() for m in t)
            cur = out.get(key)
            coeff = t[0].coeff * t[1].coeff * t[2].coeff
            if cur is None:
                out[key] = coeff
            else:
                if cur.qpow != coeff.qpow or cur.qphase != coeff.qphase:
                    return None
                out[key] = QScalar(cur.c + coeff.c, cur.qpow, cur.qphase)
        return {k: v for k, v in out.items() if v.c != 0}

    ln, rn = normalize(lhs), normalize(rhs)
    if ln is None or rn is None:
        return False
    if set(ln) != set(rn):
        return False
    return all(ln[k].equals(rn[k]) for k in ln)


def twist_azb(x_param: int, q: float = 0.5) -> TwistedAzb:
    """The integer-twist family; x = 0 reproduces the undeformed coproduct."""
    return TwistedAzb(int(x_param), float(q))
