"""
Matrix-level Galois action on singular values of b and c.

Indices r = (n1/N, n2/N) are row vectors acted on from the right; the
Weierstrass argument attached to r on (tau, 1) is n1/N * tau + n2/N.
A W-matrix ((t - B s, -C s), (s, t)) is the matrix of multiplication by
t + s*theta on the basis (theta, 1), so (0, 1) * W = (s, t) is the index
of (t + s*theta)/N.
"""

import json
import logging
from math import gcd
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from mpmath import mpf

from ..core.errors import CaseMismatch, HypothesisViolated, InvalidC, MissingBetaQ, UsageError
from .cmfields import ImagQuadField, KElement, QuadFormClass, reduced_forms
from .numkernel import DEFAULT_PREC, GUARD_BITS, BigComplex, LatticeBasis
from .points import EvaluatedPoint, as_big, tate_parameters, torsion_bc

logger = logging.getLogger(__name__)

Matrix2 = Tuple[Tuple[int, int], Tuple[int, int]]

# below this the unit group is larger than {+-1} and the action map has a bigger kernel
MAX_SUPPORTED_DK = -7
AMBIGUITY_FACTOR = 16


def _mat_mul(m1: Matrix2, m2: Matrix2, N: int) -> Matrix2:
    (a, b), (c, d) = m1
    (e, f), (g, h) = m2
    return (((a * e + b * g) % N, (a * f + b * h) % N),
            ((c * e + d * g) % N, (c * f + d * h) % N))


def _det(m: Matrix2) -> int:
    (a, b), (c, d) = m
    return a * d - b * c


def as_matrix(alpha: Union["WMatrix", Sequence[Sequence[int]]], N: int) -> Matrix2:
    if isinstance(alpha, WMatrix):
        return alpha.matrix
    (a, b), (c, d) = alpha
    return ((int(a) % N, int(b) % N), (int(c) % N, int(d) % N))


class WMatrix:
    """Element of W_{N,theta}: multiplication by t + s*theta on O_K/N"""

    def __init__(self, t: int, s: int, N: int, field: ImagQuadField):
        self.N = int(N)
        self.t = int(t) % self.N
        self.s = int(s) % self.N
        self.field = field

    @property
    def matrix(self) -> Matrix2:
        Bt, Ct, N = self.field.B_theta, self.field.C_theta, self.N
        t, s = self.t, self.s
        return (((t - Bt * s) % N, (-Ct * s) % N), (s, t))

    @property
    def det(self) -> int:
        Bt, Ct = self.field.B_theta, self.field.C_theta
        return (self.t ** 2 - Bt * self.t * self.s + Ct * self.s ** 2) % self.N

    def is_invertible(self) -> bool:
        return gcd(self.det, self.N) == 1

    def key(self) -> Tuple[int, int]:
        """Canonical representative of {M, -M}"""
        neg = ((-self.t) % self.N, (-self.s) % self.N)
        return min((self.t, self.s), neg)

    def is_identity(self) -> bool:
        return self.key() == WMatrix(1, 0, self.N, self.field).key()

    def element(self) -> KElement:
        """t + s*theta"""
        return self.field.element(self.t) + self.field.theta * self.s

    def __mul__(self, other: "WMatrix") -> "WMatrix":
        if self.N != other.N or self.field != other.field:
            raise ValueError("W-matrices of different level or field")
        (_, _), (s, t) = _mat_mul(self.matrix, other.matrix, self.N)
        product = WMatrix(t, s, self.N, self.field)
        if product.matrix != _mat_mul(self.matrix, other.matrix, self.N):
            raise ValueError("W-matrix product left the W-shape")
        return product

    def __eq__(self, other) -> bool:
        return isinstance(other, WMatrix) and self.N == other.N and self.key() == other.key()

    def __hash__(self):
        return hash((self.N, self.key()))

    def __repr__(self) -> str:
        return f"WMatrix(t={self.t}, s={self.s}, N={self.N})"

    def to_dict(self) -> Dict[str, Any]:
        return {"t": self.t, "s": self.s, "N": self.N, "matrix": [list(r) for r in self.matrix], "det": self.det}


def w_group(N: int, field: ImagQuadField) -> List[WMatrix]:
    """Invertible W-matrices modulo +-1, identity first"""
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    seen = {}
    for t in range(N):
        for s in range(N):
            m = WMatrix(t, s, N, field)
            if m.is_invertible():
                seen.setdefault(m.key(), WMatrix(*m.key(), N, field))
    identity = WMatrix(1, 0, N, field).key()
    return sorted(seen.values(), key=lambda m: (m.key() != identity, m.key()))


def is_g_n_type(m: WMatrix) -> bool:
    """Scalar W-matrices t*I; on the index (0, 1/N) they act as k/N -> tk/N"""
    return m.s == 0


class FrickeIndex:
    """r = (n1/N, n2/N) in (1/N)Z^2 / Z^2"""

    def __init__(self, n1: int, n2: int, N: int):
        self.N = int(N)
        self.n1 = int(n1) % self.N
        self.n2 = int(n2) % self.N

    @property
    def r(self) -> Tuple[mpf, mpf]:
        return mpf(self.n1) / self.N, mpf(self.n2) / self.N

    def as_tuple(self) -> Tuple[int, int]:
        return self.n1, self.n2

    def is_zero(self) -> bool:
        return self.n1 == 0 and self.n2 == 0

    def __eq__(self, other) -> bool:
        return isinstance(other, FrickeIndex) and (self.N, self.n1, self.n2) == (other.N, other.n1, other.n2)

    def __hash__(self):
        return hash((self.N, self.n1, self.n2))

    def __repr__(self) -> str:
        return f"FrickeIndex({self.n1}/{self.N}, {self.n2}/{self.N})"

    def to_dict(self) -> Dict[str, Any]:
        return {"r1": f"{self.n1}/{self.N}", "r2": f"{self.n2}/{self.N}"}


def act_index(r: FrickeIndex, alpha: Union[WMatrix, Sequence[Sequence[int]]]) -> FrickeIndex:
    """r * alpha mod 1"""
    N = r.N
    m = as_matrix(alpha, N)
    if gcd(_det(m) % N, N) != 1:
        raise ValueError(f"Matrix {m} is not invertible mod {N}")
    (a, b), (c, d) = m
    return FrickeIndex(r.n1 * a + r.n2 * c, r.n1 * b + r.n2 * d, N)


class GaloisElement:
    """(alpha, Q) with alpha in W_{N,theta} mod +-1 and Q a reduced form of discriminant dK"""

    def __init__(self, alpha: WMatrix, form: Optional[QuadFormClass] = None,
                 beta_q: Optional[Matrix2] = None):
        self.alpha = alpha
        self.form = form or reduced_forms(alpha.field.dK)[0]
        if self.form.disc != alpha.field.dK or not self.form.is_reduced():
            raise ValueError(f"{self.form!r} is not a reduced form of discriminant {alpha.field.dK}")
        self.beta_q = beta_q

    @property
    def is_principal(self) -> bool:
        return self.form.is_principal()

    def combined_matrix(self) -> Matrix2:
        N = self.alpha.N
        if self.is_principal:
            return self.alpha.matrix
        if self.beta_q is None:
            raise MissingBetaQ(f"No beta_Q matrix supplied for form {self.form.key()}",
                               {"form": self.form.to_dict()})
        return _mat_mul(self.alpha.matrix, as_matrix(self.beta_q, N), N)

    def to_dict(self) -> Dict[str, Any]:
        out = {"alpha": self.alpha.to_dict(), "Q": self.form.to_dict()}
        if self.beta_q is not None:
            out["betaQ"] = [list(r) for r in self.beta_q]
        return out


def load_beta_data(path: Path, N: int) -> Dict[str, Matrix2]:
    """Read externally sourced beta_Q matrices, keyed by form 'a,b,c'"""
    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"Cannot read beta_Q data from {path}: {e}")
    try:
        lift = data.get("lift")
        out = {}
        for entry in data["classes"]:
            a, b, c = entry["form"]
            m = as_matrix(entry["matrix"], N)
            if lift is not None:
                m = _mat_mul(m, as_matrix(lift, N), N)
            out[QuadFormClass(a, b, c).key()] = m
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"Malformed beta_Q data in {path}: {e}")
    logger.info(f"Loaded {len(out)} beta_Q matrices from {path}")
    return out


def _check_regime(field: ImagQuadField) -> None:
    if field.dK > MAX_SUPPORTED_DK:
        raise HypothesisViolated("dK <= -7", {"dK": field.dK})


def point_under_matrix(g: GaloisElement, N: int, B: int = DEFAULT_PREC,
                       tau: Optional[KElement] = None) -> EvaluatedPoint:
    """(b, c) at theta (theta_Q for non-principal Q) with the index (0, 1/N) moved by the action"""
    field = g.alpha.field
    _check_regime(field)
    if g.alpha.N != N:
        raise ValueError(f"alpha has level {g.alpha.N}, expected {N}")
    if tau is not None and tau != field.theta:
        raise CaseMismatch("Matrix action is evaluated only at theta or theta_Q", {"tau": tau.to_dict()})
    matrix = g.combined_matrix()
    index = act_index(FrickeIndex(0, 1, N), matrix)
    W = B + GUARD_BITS
    if g.is_principal:
        tau_big, desc = field.theta.to_big(W), "theta"
    else:
        tau_big, desc = BigComplex.exact(field.theta_q(g.form, W), W), f"theta_Q[{g.form.key()}]"
    b_val, c_val = tate_parameters(tau_big, N, B, index.as_tuple())
    return EvaluatedPoint(b_val, c_val, B, N, tau_desc=desc, index=index.as_tuple())


def galois_orbit(field: ImagQuadField, N: int, B: int = DEFAULT_PREC) -> List[Tuple[WMatrix, EvaluatedPoint]]:
    """Principal-class orbit of P_theta over W_{N,theta} in canonical order"""
    return [(m, point_under_matrix(GaloisElement(m), N, B)) for m in w_group(N, field)]


def vienna_act(C: KElement, tau: KElement, N: int, B: int = DEFAULT_PREC, conductor: int = 1) -> EvaluatedPoint:
    """(b, c) with the torsion point 1/N replaced by C/N on the lattice (tau, 1)"""
    if not C.is_integral() or int(C.y) % conductor:
        raise InvalidC(f"C={C!r} is not in the order of conductor {conductor}", {"C": C.to_dict()})
    norm = int(C.norm())
    if gcd(norm, N) != 1:
        raise InvalidC(f"C={C!r} is not invertible mod N={N}", {"C": C.to_dict(), "norm": norm, "N": N})
    W = B + GUARD_BITS
    tau_big = as_big(tau, W)
    basis = LatticeBasis.from_tau(tau_big, W)
    z1 = C.to_big(W) / N
    b_val, c_val = torsion_bc(z1, basis, N, B, C.to_dict())
    return EvaluatedPoint(b_val, c_val, B, N, tau_desc=f"{tau!r}, C={C!r}")


def match_tolerance_log2(B: int) -> int:
    return -(B // 3)


def match_points(first: Sequence[EvaluatedPoint], second: Sequence[EvaluatedPoint],
                 tol_log2: int) -> Dict[str, Any]:
    """Greedy bijective matching of two point multisets within 2**tol_log2"""
    if len(first) != len(second):
        return {"matched": False, "reason": "size mismatch", "sizes": [len(first), len(second)],
                "maxMatchError": None, "pairs": [], "ambiguous": []}
    remaining = list(range(len(second)))
    pairs: List[Tuple[int, int]] = []
    ambiguous: List[int] = []
    worst: Optional[float] = None
    for i, pt in enumerate(first):
        scored = []
        for j in remaining:
            scored.append((pt.distance_log2(second[j]), j))
        scored.sort()
        if not scored or scored[0][0] > tol_log2:
            return {"matched": False, "reason": f"no partner for item {i}", "maxMatchError": worst,
                    "pairs": pairs, "ambiguous": ambiguous,
                    "nearest": None if not scored else scored[0][0]}
        best, j = scored[0]
        if len(scored) > 1 and scored[1][0] <= best + AMBIGUITY_FACTOR.bit_length() - 1:
            ambiguous.append(i)
        pairs.append((i, j))
        remaining.remove(j)
        if best != float("-inf"):
            worst = best if worst is None else max(worst, best)
    return {"matched": not ambiguous, "reason": "ambiguous matches" if ambiguous else None,
            "maxMatchError": worst, "pairs": pairs, "ambiguous": ambiguous}


def orbit_stability_check(field: ImagQuadField, N: int, B: int = DEFAULT_PREC,
                          orbit: Optional[List[Tuple[WMatrix, EvaluatedPoint]]] = None) -> Dict[str, Any]:
    """Translating the orbit by each group element permutes its values"""
    orbit = orbit or galois_orbit(field, N, B)
    tol = match_tolerance_log2(B)
    values = [pt for _, pt in orbit]
    distinct = match_points(values, values, tol)["matched"]
    records = []
    for beta in w_group(N, field):
        moved = [point_under_matrix(GaloisElement(m * beta), N, B) for m, _ in orbit]
        result = match_points(values, moved, tol)
        records.append({"beta": beta.to_dict(), "matched": result["matched"],
                        "maxMatchError": result["maxMatchError"]})
    errors = [r["maxMatchError"] for r in records if r["maxMatchError"] is not None]
    ok = distinct and all(r["matched"] for r in records)
    return {
        "verdict": "verified" if ok else "falsified",
        "orbitSize": len(orbit),
        "pairwiseDistinct": distinct,
        "toleranceLog2": tol,
        "maxMatchError": max(errors) if errors else None,
        "records": records,
    }


def composition_check(alpha: WMatrix, alpha2: WMatrix, B: int = DEFAULT_PREC) -> Dict[str, Any]:
    """Acting by alpha then alpha2 agrees with acting by alpha * alpha2"""
    N = alpha.N
    step = act_index(act_index(FrickeIndex(0, 1, N), alpha), alpha2)
    direct = act_index(FrickeIndex(0, 1, N), _mat_mul(alpha.matrix, alpha2.matrix, N))
    theta = alpha.field.theta.to_big(B + GUARD_BITS)
    b1, c1 = tate_parameters(theta, N, B, step.as_tuple())
    combined = point_under_matrix(GaloisElement(alpha * alpha2), N, B)
    two_step = EvaluatedPoint(b1, c1, B, N, tau_desc="theta", index=step.as_tuple())
    distance = two_step.distance_log2(combined)
    ok = step == direct and distance < -(B - 60)
    return {"verdict": "verified" if ok else "falsified", "indexEqual": step == direct,
            "distanceLog2": distance, "index": step.to_dict()}
