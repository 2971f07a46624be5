"""
CM points P_tau = (b(tau), c(tau)) on X1(N), the T_p fibers of a conductor
raise, and the checks that tie them to the distribution relation: exact
lattice and coset layers first, numeric divisor layer last.
"""

import logging
from math import gcd
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from mpmath import mp, mpc, mpf
from sympy import Poly, factor_list, symbols

from ..core.errors import (CaseMismatch, DegenerateLevel, HypothesisViolated, InsufficientPrecision,
                           MissingBetaQ, UnsupportedN)
from .cmfields import (INERT, P_DIVIDES_C, ImagQuadField, KElement, check_case, class_number,
                       conductor_raise_cosets, cosets_distinct_check, field_data, reduced_forms,
                       verify_sj_lattices)
from .galoisact import match_points, match_tolerance_log2, w_group
from .modelgen import DEFAULT_MAX_LEVEL, eval_curve_equation, eval_ratfunc, tate_invariants
from .numkernel import DEFAULT_PREC, GUARD_BITS, BigComplex, j_invariant, working_precision
from .points import EvaluatedPoint, as_big, tate_parameters

logger = logging.getLogger(__name__)

X = symbols("x")

DEFAULT_TOL_LOG2 = -100
DEFAULT_HEIGHT_BOUND = 2 ** 64
# symmetric functions of a T_p fiber carry the large-Im member; e1 for (D=-2, N=4, p=5) has height ~2^85
DIVISOR_HEIGHT_BOUND = 2 ** 160
DEFAULT_ESCALATION = (300, 600, 1200, 2400)
PSLQ_MAX_STEPS = 100000

Target = Union["CMPointSpec", KElement, BigComplex]


class CMPointSpec:
    """tau' = (a + tauK)/c in K = Q(sqrt D) at level N"""

    def __init__(self, D: int, c: int, a: int, N: int):
        self.field = field_data(D)
        self.D, self.c, self.a, self.N = int(D), int(c), int(a), int(N)
        if self.N <= 3:
            raise DegenerateLevel(f"Level N={N} is degenerate for b, c", {"N": N})
        if self.c < 1:
            raise HypothesisViolated("c >= 1", {"c": c})
        if gcd(self.c, self.N) != 1:
            raise HypothesisViolated("gcd(c, N) = 1", {"c": c, "N": N})

    @property
    def tau_prime(self) -> KElement:
        return (self.field.tau_k + self.a) / self.c

    def cache_key(self, prec_bits: int) -> Tuple[int, int, int, int, int]:
        return self.D, self.N, self.c, self.a, int(prec_bits)

    def __repr__(self) -> str:
        return f"CMPointSpec(D={self.D}, c={self.c}, a={self.a}, N={self.N})"

    def to_dict(self) -> Dict[str, Any]:
        return {"D": self.D, "c": self.c, "a": self.a, "N": self.N}


class DistributionInstance:
    """A CM point spec together with a prime p and the case it falls under"""

    def __init__(self, spec: CMPointSpec, p: int, case_tag: str):
        self.spec = spec
        self.p = int(p)
        self.case_tag = case_tag
        field, c, N = spec.field, spec.c, spec.N
        check_case(field, c, self.p, case_tag, spec.a if case_tag == P_DIVIDES_C else None)
        if case_tag == INERT:
            if gcd(self.p, c * N) != 1:
                raise CaseMismatch(f"p={p} divides cN", {"p": p, "c": c, "N": N})
            if self.p % N != 1:
                raise CaseMismatch(f"p={p} is not 1 mod N={N}", {"p": p, "N": N})
        elif (N * field.dK) % self.p == 0:
            raise CaseMismatch(f"p={p} divides N dK", {"p": p, "N": N, "dK": field.dK})

    @property
    def fiber_size(self) -> int:
        return self.p + 1 if self.case_tag == INERT else self.p

    def to_dict(self) -> Dict[str, Any]:
        return {**self.spec.to_dict(), "p": self.p, "case": self.case_tag}


def _residual_within(residual: Optional[BigComplex], tol_log2: int) -> bool:
    if residual is None:
        return True
    if residual.is_zero():
        return True
    size = residual.abs_log2()
    return size is None or size < tol_log2


def eval_point(target: Target, B: int = DEFAULT_PREC, N: Optional[int] = None,
               index: Tuple[int, int] = (0, 1), max_level: int = DEFAULT_MAX_LEVEL) -> EvaluatedPoint:
    """P_tau at an exact CM point, recording the raw-form residual when rawForm(N) is available"""
    if isinstance(target, CMPointSpec):
        spec, tau, N = target, target.tau_prime, target.N
        desc = f"({target.a} + tauK)/{target.c}"
    else:
        if N is None:
            raise ValueError("N is required when evaluating at a bare tau")
        spec, tau, desc = None, target, repr(target)
    if N <= 3:
        raise DegenerateLevel(f"b, c degenerate for N={N} <= 3", {"N": N})
    b_val, c_val = tate_parameters(tau, N, B, index)
    residual = None
    try:
        residual = eval_curve_equation(b_val, c_val, N, B, max_level)
    except UnsupportedN:
        logger.debug(f"No raw form recorded for N={N}")
    point = EvaluatedPoint(b_val, c_val, B, N, spec=spec, tau_desc=desc, index=index, residual=residual)
    logger.debug(f"Evaluated {point!r}")
    return point


def diamond_point(target: Target, d: int, B: int = DEFAULT_PREC, N: Optional[int] = None,
                  max_level: int = DEFAULT_MAX_LEVEL) -> EvaluatedPoint:
    """<d> P_tau: the marked torsion point 1/N replaced by d/N"""
    level = target.N if isinstance(target, CMPointSpec) else N
    if level is None or gcd(d, level) != 1:
        raise HypothesisViolated("gcd(d, N) = 1", {"d": d, "N": level})
    return eval_point(target, B, level, (0, d % level), max_level)


class TpFiber:
    """Points of the T_p fiber, plus the separate diamond point in the p | c case"""

    def __init__(self, instance: DistributionInstance, points: List[EvaluatedPoint],
                 diamond: Optional[EvaluatedPoint] = None):
        self.instance = instance
        self.points = points
        self.diamond = diamond

    def __len__(self) -> int:
        return len(self.points)

    def all_points(self) -> List[EvaluatedPoint]:
        return self.points + ([self.diamond] if self.diamond is not None else [])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "instance": self.instance.to_dict(),
            "points": [p.to_dict() for p in self.points],
            "diamond": None if self.diamond is None else self.diamond.to_dict(),
        }


def fiber_targets(instance: DistributionInstance) -> List[Tuple[KElement, Tuple[int, int], str]]:
    """(tau, index, description) for every fiber member, the diamond point last"""
    p, N = instance.p, instance.spec.N
    tau_prime = instance.spec.tau_prime
    targets = [((tau_prime + j) / p, (0, 1), f"(tau' + {j})/{p}") for j in range(p)]
    if instance.case_tag == INERT:
        # p = 1 mod N, so the index of p * (1/p, tau') stays (0, 1/N)
        targets.append((tau_prime * p, (0, 1), f"{p} tau'"))
    else:
        targets.append((tau_prime * p, (0, p % N), f"<{p}> {p} tau'"))
    return targets


def tp_fiber(instance: DistributionInstance, B: int = DEFAULT_PREC,
             max_level: int = DEFAULT_MAX_LEVEL) -> TpFiber:
    N = instance.spec.N
    evaluated = []
    for tau, index, desc in fiber_targets(instance):
        point = eval_point(tau, B, N, index, max_level)
        point.tau_desc = desc
        evaluated.append(point)
    if instance.case_tag == INERT:
        return TpFiber(instance, evaluated)
    return TpFiber(instance, evaluated[:-1], evaluated[-1])


def degree_bound(field: ImagQuadField, c: int, N: int) -> int:
    """|W_{N,theta} / +-1| * h(c^2 dK) * [K:Q]"""
    return len(w_group(N, field)) * class_number(field.dK, c) * 2


# algebraic recognition

def _poly_at(poly: Poly, x: BigComplex) -> BigComplex:
    total = BigComplex.exact(0, x.prec)
    for coeff in poly.all_coeffs():
        total = total * x + int(coeff)
    return total


def min_poly_guess(x: BigComplex, max_deg: int, height_bound: int = DEFAULT_HEIGHT_BOUND,
                   slack: int = 16) -> Optional[Poly]:
    """Smallest-degree irreducible integer polynomial of height <= height_bound vanishing at x, or None"""
    height_bits = max(int(height_bound).bit_length() - 1, 1)
    margin = -(max_deg * height_bits + 128)
    if x.err_exp > margin:
        raise InsufficientPrecision(f"errExp {x.err_exp} above the certification margin {margin}",
                                    {"err_exp": x.err_exp, "margin": margin, "max_deg": max_deg})
    if x.is_zero():
        return Poly(X, X)

    scale = max(x.mag(), 0)
    with working_precision(x.prec):
        v = x.value
        for deg in range(1, max_deg + 1):
            powers = [v ** k for k in range(deg + 1)]
            vector = [pw.real + mp.pi * pw.imag for pw in powers]
            tol = mpf(2) ** (x.err_exp + deg * scale + height_bits + slack)
            try:
                relation = mp.pslq(vector, tol=tol, maxcoeff=int(height_bound), maxsteps=PSLQ_MAX_STEPS)
            except ValueError:
                relation = None
            if relation is None:
                continue
            candidate = Poly(list(reversed(relation)), X)
            if candidate.degree() < 1 or not _poly_at(candidate, x).is_zero(slack + deg * scale + height_bits):
                logger.debug(f"Rejected pslq candidate {candidate.as_expr()} at degree {deg}")
                continue
            factors = [Poly(f, X) for f, _ in factor_list(candidate.as_expr())[1]]
            vanishing = [f for f in factors if f.degree() >= 1 and _poly_at(f, x).is_zero(slack + deg * scale
                                                                                         + height_bits)]
            if not vanishing:
                continue
            best = min(vanishing, key=lambda f: (f.degree(), _poly_at(f, x).mag()))
            if best.LC() < 0:
                best = -best
            return best
    return None


def _recognize_report(name: str, x: BigComplex, max_deg: int, height_bound: int) -> Dict[str, Any]:
    try:
        poly = min_poly_guess(x, max_deg, height_bound)
    except InsufficientPrecision as e:
        return {"name": name, "status": "insufficient-precision", "errExp": x.err_exp, "detail": e.message}
    if poly is None:
        return {"name": name, "status": "not-recognized", "errExp": x.err_exp}
    return {"name": name, "status": "recognized", "degree": poly.degree(), "poly": str(poly.as_expr()),
            "errExp": x.err_exp}


def _escalate(B: int, escalation: Sequence[int]) -> List[int]:
    return [B] + [b for b in escalation if b > B]


def algebraicity_evidence(target: Union[EvaluatedPoint, Target], degree_bound_value: int,
                          B: int = DEFAULT_PREC, N: Optional[int] = None,
                          height_bound: int = DEFAULT_HEIGHT_BOUND,
                          escalation: Sequence[int] = DEFAULT_ESCALATION) -> Dict[str, Any]:
    """Try to recognize b and c as algebraic of degree <= degree_bound_value, raising precision as needed"""
    if isinstance(target, EvaluatedPoint):
        # a bare point cannot be recomputed at higher precision
        schedule = [target.prec_bits] if target.spec is None else _escalate(target.prec_bits, escalation)
    else:
        schedule = _escalate(B, escalation)
    attempts = []
    for bits in schedule:
        if isinstance(target, EvaluatedPoint):
            point = target if bits == target.prec_bits else eval_point(target.spec, bits)
        else:
            point = eval_point(target, bits, N)
        records = [_recognize_report("b", point.b_val, degree_bound_value, height_bound),
                   _recognize_report("c", point.c_val, degree_bound_value, height_bound)]
        attempts.append({"precBits": bits, "records": records})
        if all(r["status"] != "insufficient-precision" for r in records):
            break
        logger.info(f"Escalating recognition beyond {bits} bits")

    records = attempts[-1]["records"]
    statuses = {r["status"] for r in records}
    if statuses == {"recognized"}:
        verdict = "verified"
    elif "insufficient-precision" in statuses:
        verdict = "inconclusive"
    else:
        verdict = "falsified"
    return {"verdict": verdict, "degreeBound": degree_bound_value, "heightBits": int(height_bound).bit_length() - 1,
            "attempts": attempts, "maxMatchError": None}


def elementary_symmetric(values: Sequence[BigComplex]) -> List[BigComplex]:
    """e_1 .. e_n of values, read off prod (X - v)"""
    prec = max(v.prec for v in values)
    coeffs = [BigComplex.exact(1, prec)]
    for v in values:
        nxt = coeffs + [BigComplex.exact(0, prec)]
        for k in range(1, len(nxt)):
            nxt[k] = nxt[k] - coeffs[k - 1] * v
        coeffs = nxt
    return [coeffs[k] * (-1) ** k for k in range(1, len(coeffs))]


def _replace_point(points: List[EvaluatedPoint], position: int) -> List[EvaluatedPoint]:
    out = list(points)
    pt = out[position]
    with working_precision(pt.b_val.prec):
        shift = mpc(mpf(1) / 7, mpf(1) / 11)
    out[position] = EvaluatedPoint(pt.b_val + shift, pt.c_val, pt.prec_bits, pt.N,
                                   tau_desc=f"replaced({pt.tau_desc})", index=pt.index)
    return out


def _symmetric_layer(points: List[EvaluatedPoint], bound: int, height_bound: int) -> Dict[str, Any]:
    records = []
    for coord in ("b", "c"):
        values = [p.b_val if coord == "b" else p.c_val for p in points]
        for k, e_k in enumerate(elementary_symmetric(values), start=1):
            records.append(_recognize_report(f"e{k}({coord})", e_k, bound, height_bound))
    member = _recognize_report("member b", points[0].b_val, bound, height_bound)
    statuses = [r["status"] for r in records] + [member["status"]]
    if "insufficient-precision" in statuses:
        verdict = "inconclusive"
    elif any(r["status"] != "recognized" for r in records):
        verdict = "falsified"
    elif member["status"] == "recognized":
        # the fiber is recognized but so is a single member: no separation at this bound
        verdict = "inconclusive"
    else:
        verdict = "verified"
    return {"verdict": verdict, "mode": "symmetric", "degreeBound": bound,
            "heightBits": int(height_bound).bit_length() - 1, "records": records,
            "member": member}


def _check_orbit_mode(instance: DistributionInstance) -> None:
    spec, field = instance.spec, instance.spec.field
    if spec.c != 1 or field.dK > -7 or instance.case_tag != INERT:
        raise HypothesisViolated("orbit mode needs c = 1, dK <= -7 and the inert case", instance.to_dict())
    if class_number(field.dK) != 1:
        raise HypothesisViolated("orbit mode needs h(dK) = 1", {"dK": field.dK})


def _orbit_layer(instance: DistributionInstance, points: List[EvaluatedPoint], B: int,
                 beta_data: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """Match the fiber against theta_Q values of the forms of discriminant p^2 dK"""
    spec = instance.spec
    field = spec.field
    _check_orbit_mode(instance)
    disc = instance.p ** 2 * field.dK
    forms = reduced_forms(disc)
    W = B + GUARD_BITS
    conjugates = []
    for form in forms:
        matrix = None if form.is_principal() else (beta_data or {}).get(form.key())
        if matrix is None and not form.is_principal():
            raise MissingBetaQ(f"No beta_Q matrix supplied for form {form.key()}", {"form": form.to_dict()})
        (m00, m01), (m10, m11) = matrix if matrix is not None else ((1, 0), (0, 1))
        index = (m10 % spec.N, m11 % spec.N)
        with working_precision(W):
            tau_q = (-form.b + mpc(0, mp.sqrt(-disc))) / (2 * form.a)
        b_val, c_val = tate_parameters(BigComplex.exact(tau_q, W), spec.N, B, index)
        conjugates.append(EvaluatedPoint(b_val, c_val, B, spec.N, tau_desc=f"theta_Q[{form.key()}]", index=index))
    result = match_points(points, conjugates, match_tolerance_log2(B))
    return {"verdict": "verified" if result["matched"] else "falsified", "mode": "orbit",
            "forms": [f.to_dict() for f in forms], "maxMatchError": result["maxMatchError"],
            "reason": result["reason"]}


def verify_distribution(instance: DistributionInstance, B: int = DEFAULT_PREC, tol_log2: int = DEFAULT_TOL_LOG2,
                        mode: Optional[str] = None, bound: Optional[int] = None,
                        height_bound: int = DIVISOR_HEIGHT_BOUND,
                        escalation: Sequence[int] = DEFAULT_ESCALATION,
                        replace_position: Optional[int] = None,
                        beta_data: Optional[Dict[str, Any]] = None,
                        max_level: int = DEFAULT_MAX_LEVEL) -> Dict[str, Any]:
    """Lattice layer, coset layer, then the numeric divisor layer"""
    spec = instance.spec
    field, c, a, p, N = spec.field, spec.c, spec.a, instance.p, spec.N
    layers: Dict[str, Any] = {}
    mode = mode or ("symmetric" if instance.case_tag == INERT else "record")
    if mode == "orbit":
        _check_orbit_mode(instance)

    layers["lattice"] = verify_sj_lattices(field, c, a, p, instance.case_tag, N=N)

    reps = conductor_raise_cosets(field, c, p, instance.case_tag, spec.tau_prime)
    cosets = cosets_distinct_check(reps, p, instance.case_tag, c=c)
    cosets["count_matches"] = len(reps) == instance.fiber_size
    if not cosets["count_matches"]:
        cosets["verdict"] = "falsified"
    layers["cosets"] = cosets

    exact_ok = layers["lattice"]["verdict"] == "verified" and cosets["verdict"] == "verified"
    bound = bound or degree_bound(field, c, N)
    divisor: Dict[str, Any] = {"verdict": "inconclusive", "attempts": []}
    fiber = None
    for bits in _escalate(B, escalation):
        fiber = tp_fiber(instance, bits, max_level)
        membership = [_residual_within(pt.residual, tol_log2) for pt in fiber.all_points()]
        points = fiber.points if instance.case_tag == P_DIVIDES_C else fiber.all_points()
        if replace_position is not None:
            points = _replace_point(points, replace_position)
        if mode == "orbit":
            divisor = _orbit_layer(instance, points, bits, beta_data)
        elif mode == "record":
            divisor = {"verdict": "verified", "mode": "record", "points": [pt.to_dict() for pt in points]}
        else:
            divisor = _symmetric_layer(points, bound, height_bound)
        divisor["precBits"] = bits
        divisor["modelMembership"] = membership
        if not all(membership):
            divisor["verdict"] = "falsified"
        if divisor["verdict"] != "inconclusive":
            break
        logger.info(f"Divisor layer inconclusive at {bits} bits; escalating")
    layers["divisor"] = divisor

    if not exact_ok or divisor["verdict"] == "falsified":
        verdict = "falsified"
    elif divisor["verdict"] == "inconclusive":
        verdict = "inconclusive"
    else:
        verdict = "verified"
    errors = [pt.err_exp for pt in fiber.all_points()] if fiber else []
    report = {
        "verdict": verdict,
        "instance": instance.to_dict(),
        "fiberSize": len(fiber) if fiber else 0,
        "diamondPoint": None if fiber is None or fiber.diamond is None else fiber.diamond.to_dict(),
        "maxMatchError": divisor.get("maxMatchError", max(errors) if errors else None),
        "layers": layers,
    }
    if verdict == "falsified":
        logger.warning(f"Distribution check falsified for {instance.to_dict()}")
    return report


def _in_gamma1(matrix, N: int) -> bool:
    (a, b), (c, d) = matrix
    return a * d - b * c == 1 and a % N == 1 % N and d % N == 1 % N and c % N == 0


def gamma1_invariance_check(N: int, taus: Sequence[Any], matrices: Sequence[Any],
                            B: int = DEFAULT_PREC) -> Dict[str, Any]:
    """|b(gamma tau) - b(tau)| and |c(gamma tau) - c(tau)| below 2^-(B-60)"""
    tol = -(B - 60)
    W = B + GUARD_BITS
    records = []
    for tau in taus:
        tau_big = as_big(tau, W)
        base = tate_parameters(tau_big, N, B)
        for matrix in matrices:
            (a, b), (c, d) = matrix
            moved_tau = (tau_big * a + b) / (tau_big * c + d)
            moved = tate_parameters(moved_tau, N, B)
            worst = max(base[0].distance_log2(moved[0]), base[1].distance_log2(moved[1]))
            records.append({
                "tau": [str(mp.nstr(tau_big.re, 15)), str(mp.nstr(tau_big.im, 15))],
                "matrix": [list(matrix[0]), list(matrix[1])],
                "inGamma1": _in_gamma1(matrix, N),
                "distanceLog2": worst,
                "invariant": worst < tol,
            })
    worst_all = [r["distanceLog2"] for r in records]
    return {
        "verdict": "verified" if all(r["invariant"] for r in records) else "falsified",
        "N": N,
        "toleranceLog2": tol,
        "maxMatchError": max(worst_all) if worst_all else None,
        "records": records,
    }


def j_consistency(point: EvaluatedPoint, tau: Any, B: int = DEFAULT_PREC) -> Dict[str, Any]:
    """j(E(b, c)) against j(tau)"""
    from_model = eval_ratfunc(tate_invariants()["j"], point.b_val, point.c_val)
    from_tau = j_invariant(as_big(tau, B + GUARD_BITS), B)
    distance = from_model.distance_log2(from_tau)
    agree = from_model.agrees_with(from_tau, slack=16)
    return {
        "verdict": "verified" if agree else "falsified",
        "jFromModel": from_model.to_dict(),
        "jFromTau": from_tau.to_dict(),
        "maxMatchError": distance,
    }


def build_instance(D: int, N: int, c: int, a: int, p: int, case_tag: Optional[str] = None) -> DistributionInstance:
    """Instance with the case inferred from p | c when not given"""
    spec = CMPointSpec(D, c, a, N)
    tag = case_tag or (P_DIVIDES_C if c % p == 0 else INERT)
    return DistributionInstance(spec, p, tag)

