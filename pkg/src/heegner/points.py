"""Points (b(tau), c(tau)) on X1(N) computed from Weierstrass values"""

import logging
from typing import Any, Dict, Optional, Tuple

from ..core.errors import DegenerateLevel, PoleAtTorsion
from .numkernel import DEFAULT_PREC, GUARD_BITS, BigComplex, LatticeBasis, wp_pair

logger = logging.getLogger(__name__)

Index = Tuple[int, int]


class EvaluatedPoint:
    """(b, c) with tracked errors, tagged with the data it was computed from"""

    def __init__(self, b_val: BigComplex, c_val: BigComplex, prec_bits: int, N: int,
                 spec: Optional[Any] = None, tau_desc: str = "", index: Index = (0, 1),
                 residual: Optional[BigComplex] = None):
        self.b_val = b_val
        self.c_val = c_val
        self.prec_bits = int(prec_bits)
        self.N = int(N)
        self.spec = spec
        self.tau_desc = tau_desc
        self.index = tuple(index)
        self.residual = residual

    @property
    def err_exp(self) -> int:
        return max(self.b_val.err_exp, self.c_val.err_exp)

    def agrees_with(self, other: "EvaluatedPoint", slack: int = 1) -> bool:
        return self.b_val.agrees_with(other.b_val, slack) and self.c_val.agrees_with(other.c_val, slack)

    def distance_log2(self, other: "EvaluatedPoint") -> float:
        return max(self.b_val.distance_log2(other.b_val), self.c_val.distance_log2(other.c_val))

    def residual_log2(self) -> Optional[float]:
        return None if self.residual is None else self.residual.abs_log2()

    def __repr__(self) -> str:
        return f"EvaluatedPoint(N={self.N}, tau={self.tau_desc}, b={self.b_val!r}, c={self.c_val!r})"

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "N": self.N,
            "tauDesc": self.tau_desc,
            "index": list(self.index),
            "precBits": self.prec_bits,
            "b": self.b_val.to_dict(),
            "c": self.c_val.to_dict(),
            "errExp": self.err_exp,
        }
        if self.spec is not None and hasattr(self.spec, "to_dict"):
            out.update(self.spec.to_dict())
        if self.residual is not None:
            out["residualLog2"] = self.residual_log2()
            out["residualErrExp"] = self.residual.err_exp
        return out


def as_big(tau, prec: int) -> BigComplex:
    """Coerce an exact CM surd (anything with to_big), BigComplex or plain number"""
    if isinstance(tau, BigComplex):
        return tau
    if hasattr(tau, "to_big"):
        return tau.to_big(prec)
    return BigComplex.exact(tau, prec)


def torsion_bc(z1: BigComplex, basis: LatticeBasis, N: int, B: int = DEFAULT_PREC,
               index_desc: Optional[Any] = None) -> Tuple[BigComplex, BigComplex]:
    """b = -(p(z1) - p(2 z1))^3 / p'(z1)^2 and c = -p'(2 z1) / p'(z1) on basis"""
    if N <= 3:
        raise DegenerateLevel(f"b, c degenerate for N={N} <= 3", {"N": N})
    z2 = z1 * 2
    p1, d1 = wp_pair(z1, basis, B)
    p2, d2 = wp_pair(z2, basis, B)
    if d1.is_zero(slack=2):
        raise PoleAtTorsion(f"p'(z) vanishes within error at {index_desc}",
                            {"N": N, "index": index_desc, "err_exp": d1.err_exp})
    b_val = -((p1 - p2) ** 3) / d1 ** 2
    c_val = -d2 / d1
    return b_val, c_val


def tate_parameters(tau, N: int, B: int = DEFAULT_PREC,
                    index: Index = (0, 1)) -> Tuple[BigComplex, BigComplex]:
    """(b, c) at the torsion point (n1 tau + n2)/N of C/(Z tau + Z)"""
    if N <= 3:
        raise DegenerateLevel(f"b, c degenerate for N={N} <= 3", {"N": N})
    tau = as_big(tau, B + GUARD_BITS)
    basis = LatticeBasis.from_tau(tau, B + GUARD_BITS)
    n1, n2 = index
    z1 = (tau * n1 + n2) / N
    return torsion_bc(z1, basis, N, B, list(index))
