"""
Exact arithmetic on the Tate normal form

    E(b, c):  Y^2 + (1 - c) XY - bY = X^3 - bX^2,   P = (0, 0)

over the rational function field Q(b, c): multiples of P by the chord-tangent
law, raw-form models of X1(N) cut out by NP = O, and the N = 11 optimized
model check.
"""

import logging
from functools import lru_cache
from typing import Any, Dict, List, Optional, Tuple

from sympy import Poly, QQ, Rational, div, symbols
from sympy.polys.fields import field
from sympy.polys.orderings import grlex
from sympy.polys.rings import ring

from ..core.errors import DivisionFails, UnsupportedN
from .numkernel import DEFAULT_PREC, BigComplex

logger = logging.getLogger(__name__)

# Q[b, c] with graded-lex order, b > c
POLY_RING, B_RING, C_RING = ring("b,c", QQ, grlex)
FIELD, B, C = field("b,c", QQ, grlex)

DEFAULT_MAX_LEVEL = 13
DEFAULT_MAX_DEGREE = 60

# degenerate loci and the order of P they force
DEGENERATE_FACTORS = (
    (C_RING, 4),
    (B_RING - C_RING, 5),
    (B_RING - C_RING - C_RING ** 2, 6),
)


def _is_zero(f) -> bool:
    return not f.numer


class TatePoint:
    """Affine point (x, y) of E(b, c) over Q(b, c), or the point at infinity"""

    def __init__(self, x=None, y=None):
        if (x is None) != (y is None):
            raise ValueError("TatePoint needs both coordinates or neither")
        self.x = x
        self.y = y

    @classmethod
    def infinity(cls) -> "TatePoint":
        return cls()

    @property
    def is_infinity(self) -> bool:
        return self.x is None

    def on_curve(self) -> bool:
        if self.is_infinity:
            return True
        x, y = self.x, self.y
        return _is_zero(y ** 2 + (1 - C) * x * y - B * y - x ** 3 + B * x ** 2)

    def __neg__(self) -> "TatePoint":
        if self.is_infinity:
            return self
        return TatePoint(self.x, -self.y - (1 - C) * self.x + B)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TatePoint):
            return NotImplemented
        if self.is_infinity or other.is_infinity:
            return self.is_infinity and other.is_infinity
        return _is_zero(self.x - other.x) and _is_zero(self.y - other.y)

    def __hash__(self):
        return hash((self.x, self.y))

    def __repr__(self) -> str:
        if self.is_infinity:
            return "TatePoint(O)"
        return f"TatePoint(x={format_ratfunc(self.x)}, y={format_ratfunc(self.y)})"

    def to_dict(self) -> Dict[str, Any]:
        if self.is_infinity:
            return {"kind": "infinity"}
        return {"kind": "affine", "x": format_ratfunc(self.x), "y": format_ratfunc(self.y)}


BASE_POINT = TatePoint(FIELD(0), FIELD(0))


def specialize(f, b_val, c_val) -> Optional[Rational]:
    """Value of f in Q(b, c) at rational (b, c); None on a pole"""
    point = [(B_RING, QQ.from_sympy(Rational(b_val))), (C_RING, QQ.from_sympy(Rational(c_val)))]
    den = f.denom.set_ring(POLY_RING).evaluate(point)
    if den == 0:
        return None
    num = f.numer.set_ring(POLY_RING).evaluate(point)
    return QQ.to_sympy(num) / QQ.to_sympy(den)


def tate_add(p1: TatePoint, p2: TatePoint) -> TatePoint:
    """Chord-tangent sum on E(b, c)"""
    if p1.is_infinity:
        return p2
    if p2.is_infinity:
        return p1

    a1, a2, a3, a4, a6 = 1 - C, -B, -B, FIELD(0), FIELD(0)
    x1, y1, x2, y2 = p1.x, p1.y, p2.x, p2.y

    if _is_zero(x1 - x2):
        if _is_zero(y1 + y2 + a1 * x2 + a3):
            return TatePoint.infinity()
        denom = 2 * y1 + a1 * x1 + a3
        lam = (3 * x1 ** 2 + 2 * a2 * x1 + a4 - a1 * y1) / denom
        nu = (-x1 ** 3 + a4 * x1 + 2 * a6 - a3 * y1) / denom
    else:
        lam = (y2 - y1) / (x2 - x1)
        nu = (y1 * x2 - y2 * x1) / (x2 - x1)

    x3 = lam ** 2 + a1 * lam - a2 - x1 - x2
    y3 = -(lam + a1) * x3 - nu - a3
    return TatePoint(x3, y3)


@lru_cache(maxsize=None)
def tate_multiple(n: int) -> TatePoint:
    """nP for the marked point P = (0, 0)"""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if n == 1:
        return BASE_POINT
    return tate_add(tate_multiple(n - 1), BASE_POINT)


def _strip_factor(poly, factor) -> Tuple[Any, int]:
    count = 0
    while True:
        q, r = poly.div(factor)
        if r:
            return poly, count
        poly, count = q, count + 1


def canonical_poly(poly):
    """Primitive over Z with positive leading coefficient under grlex"""
    if not poly:
        return poly
    _, prim = poly.clear_denoms()
    prim = prim.set_ring(POLY_RING)
    _, prim = prim.primitive()
    if prim.LC < 0:
        prim = -prim
    return prim


def _torsion_numerator(N: int, k: Optional[int] = None):
    """Numerator of the identity encoding NP = O, written as kP = -(N-k)P"""
    k = N // 2 if k is None else k
    if not 1 <= k < N:
        raise ValueError(f"k must lie in [1, N), got k={k} for N={N}")
    if 2 * k != N:
        pk, pl = tate_multiple(k), tate_multiple(N - k)
        condition = pk.x - pl.x
    else:
        # (N/2)P is 2-torsion: y equals the y-coordinate of its negative
        pk = tate_multiple(k)
        condition = 2 * pk.y + (1 - C) * pk.x - B
    return condition.numer.set_ring(POLY_RING)


@lru_cache(maxsize=None)
def _raw_form_cached(N: int, max_degree: int, k: Optional[int]):
    numer = _torsion_numerator(N, k)
    if total_degree(numer) > max_degree:
        raise UnsupportedN(f"Torsion condition for N={N} exceeds degree budget {max_degree}",
                           {"N": N, "degree": total_degree(numer)})
    removed: Dict[str, int] = {}
    numer, removed["b"] = _strip_factor(numer, B_RING)
    for factor, order in DEGENERATE_FACTORS:
        if order == N:
            continue
        numer, removed[format_poly(factor)] = _strip_factor(numer, factor)
    result = canonical_poly(numer)
    if result.is_ground:
        raise UnsupportedN(f"Torsion condition for N={N} collapsed to a constant", {"N": N})
    logger.debug(f"rawForm({N}): removed {removed}, {len(result.terms())} terms")
    return result


def raw_form(N: int, max_level: int = DEFAULT_MAX_LEVEL, max_degree: int = DEFAULT_MAX_DEGREE,
             k: Optional[int] = None):
    """Defining polynomial of X1(N) in (b, c), degenerate factors removed

    k selects the identity x(kP) = x((N-k)P); the default k = N // 2 sits next to N/2.
    """
    if N < 4:
        raise UnsupportedN(f"Raw forms start at N=4, got {N}", {"N": N})
    if N > max_level:
        raise UnsupportedN(f"N={N} exceeds the configured level cap {max_level}", {"N": N})
    return _raw_form_cached(N, max_degree, k)


def total_degree(poly) -> int:
    return max((sum(m) for m in poly.monoms()), default=0)


# Canonical text / JSON forms

def _format_monomial(coeff, exps: Tuple[int, int], names=("b", "c")) -> str:
    parts = []
    for name, e in zip(names, exps):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    mag = abs(coeff)
    if not parts:
        return str(mag)
    if mag == 1:
        return "*".join(parts)
    return f"{mag}*" + "*".join(parts)


def format_poly(poly, names=("b", "c")) -> str:
    """Text form '+c*b^i*c^j - ...' in grlex order"""
    terms = poly.terms()
    if not terms:
        return "0"
    out: List[str] = []
    for i, (exps, coeff) in enumerate(terms):
        body = _format_monomial(coeff, exps, names)
        sign = "-" if coeff < 0 else "+"
        if i == 0:
            out.append(body if sign == "+" else f"-{body}")
        else:
            out.append(f" {sign} {body}")
    return "".join(out)


def format_ratfunc(f) -> str:
    num, den = f.numer, f.denom
    if den == 1:
        return format_poly(num)
    return f"({format_poly(num)})/({format_poly(den)})"


def poly_terms(poly) -> List[Dict[str, Any]]:
    """JSON term list, exact coefficients as 'num/den' strings"""
    return [
        {"b": exps[0], "c": exps[1], "coeff": str(QQ.to_sympy(coeff))}
        for exps, coeff in poly.terms()
    ]


def poly_from_terms(terms: List[Dict[str, Any]]):
    poly = POLY_RING(0)
    for term in terms:
        coeff = QQ.from_sympy(Rational(term["coeff"]))
        poly += B_RING ** int(term["b"]) * C_RING ** int(term["c"]) * coeff
    return poly


def equal_up_to_sign(p1, p2) -> bool:
    return p1 == p2 or p1 == -p2


# Tate curve invariants

@lru_cache(maxsize=1)
def tate_invariants() -> Dict[str, Any]:
    """b2, b4, b6, b8, c4, discriminant and j of E(b, c) as elements of Q(b, c)"""
    a1, a2, a3, a4, a6 = 1 - C, -B, -B, FIELD(0), FIELD(0)
    b2 = a1 ** 2 + 4 * a2
    b4 = a1 * a3 + 2 * a4
    b6 = a3 ** 2 + 4 * a6
    b8 = a1 ** 2 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 ** 2 - a4 ** 2
    c4 = b2 ** 2 - 24 * b4
    disc = -b2 ** 2 * b8 - 8 * b4 ** 3 - 27 * b6 ** 2 + 9 * b2 * b4 * b6
    return {"b2": b2, "b4": b4, "b6": b6, "b8": b8, "c4": c4, "discriminant": disc, "j": c4 ** 3 / disc}


def is_nonsingular(b_val, c_val) -> bool:
    """Exact test that E(b, c) has nonzero discriminant at rational parameters"""
    value = specialize(tate_invariants()["discriminant"], b_val, c_val)
    return value is not None and value != 0


def _eval_poly_big(poly, b_val: BigComplex, c_val: BigComplex) -> BigComplex:
    total = BigComplex.exact(0, max(b_val.prec, c_val.prec))
    b_pows: Dict[int, BigComplex] = {}
    c_pows: Dict[int, BigComplex] = {}
    for (i, j), coeff in poly.terms():
        if i not in b_pows:
            b_pows[i] = b_val ** i
        if j not in c_pows:
            c_pows[j] = c_val ** j
        total = total + b_pows[i] * c_pows[j] * QQ.to_sympy(coeff)
    return total


def eval_ratfunc(f, b_val: BigComplex, c_val: BigComplex) -> BigComplex:
    return _eval_poly_big(f.numer, b_val, c_val) / _eval_poly_big(f.denom, b_val, c_val)


def eval_curve_equation(b_val, c_val, N: int, B: int = DEFAULT_PREC,
                        max_level: int = DEFAULT_MAX_LEVEL) -> BigComplex:
    """rawForm(N) evaluated at (b_val, c_val) with propagated error"""
    prec = B + 64
    b_bc = b_val if isinstance(b_val, BigComplex) else BigComplex.exact(b_val, prec)
    c_bc = c_val if isinstance(c_val, BigComplex) else BigComplex.exact(c_val, prec)
    return _eval_poly_big(raw_form(N, max_level=max_level), b_bc, c_bc)


# The N = 11 optimized model

_b, _c, _x, _y = symbols("b c x y")
OPTIMIZED_MODEL_11 = _y ** 2 + (_x ** 2 + 1) * _y + _x


def optimized_model_check(poly=None, strict: bool = False) -> Dict[str, Any]:
    """Substitute b=(1-x)xy(1+xy), c=(1-x)xy and divide by y^2+(x^2+1)y+x"""
    target = raw_form(11) if poly is None else poly
    expr = target.as_expr(_b, _c).subs({_b: (1 - _x) * _x * _y * (1 + _x * _y), _c: (1 - _x) * _x * _y})
    substituted = Poly(expr, _y, _x, domain=QQ)
    divisor = Poly(OPTIMIZED_MODEL_11, _y, _x, domain=QQ)
    cofactor, remainder = div(substituted, divisor)
    divisible = remainder.is_zero
    identity_holds = (cofactor * divisor + remainder) == substituted

    report = {
        "verdict": "verified" if divisible else "falsified",
        "divisible": divisible,
        "cofactor": str(cofactor.as_expr()) if divisible else None,
        "remainder": None if divisible else str(remainder.as_expr()),
        "division_identity": identity_holds,
        "substituted_degree": substituted.total_degree(),
    }
    if strict and not divisible:
        raise DivisionFails("Substituted raw form is not divisible by the optimized model", report)
    return report
