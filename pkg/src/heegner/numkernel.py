"""
Arbitrary-precision complex arithmetic with tracked error radii, lattice
reduction, and q-series evaluation of g2, g3, the Weierstrass p-function,
its derivative and the j-invariant.

Every value is a BigComplex: an mpmath complex number together with an
exponent e such that the true value lies within 2**e of it. Errors are
propagated to first order; no directed rounding is attempted.
"""

import logging
import threading
from contextlib import contextmanager
from typing import Iterator, List, Optional, Tuple, Union

from mpmath import mp, mpc, mpf

from ..core.errors import DegenerateLattice, PoleAtZ, PrecisionExhausted

DEFAULT_PREC = 300
GUARD_BITS = 64
TAIL_GUARD_BITS = 32
MAX_SERIES_TERMS = 100000
MAX_REDUCTION_STEPS = 10000

logger = logging.getLogger(__name__)

_precision_lock = threading.RLock()

Unimodular = Tuple[Tuple[int, int], Tuple[int, int]]


@contextmanager
def working_precision(bits: int) -> Iterator[None]:
    """Run a block at `bits` of mantissa, holding the process-wide mpmath lock"""
    with _precision_lock:
        with mp.workprec(int(bits)):
            yield


def _mag(x) -> Optional[int]:
    """Upper bound e with |x| <= 2**e, or None for zero"""
    if not x:
        return None
    return int(mp.mag(x))


def _lower_mag(x) -> Optional[int]:
    """Lower bound e with |x| >= 2**e, or None for zero"""
    if not x:
        return None
    return int(mp.mag(x)) - 3


def _combine(*exps: Optional[int]) -> Optional[int]:
    """Exponent bounding a sum of terms 2**e"""
    finite = [int(e) for e in exps if e is not None]
    if not finite:
        return None
    return max(finite) + len(finite).bit_length()


def _rounding(value, prec: int) -> Optional[int]:
    m = _mag(value)
    return None if m is None else m - prec + 1


def _error_floor(prec: int) -> int:
    return -2 * int(prec) - 64


def _to_mpc(x) -> mpc:
    if isinstance(x, BigComplex):
        return x.value
    if isinstance(x, (mpc, mpf, int, float, complex)):
        return mpc(x)
    if hasattr(x, "p") and hasattr(x, "q"):
        # sympy Rational / Integer
        return mpc(mpf(int(x.p)) / int(x.q))
    if hasattr(x, "numerator") and hasattr(x, "denominator"):
        return mpc(mpf(int(x.numerator)) / int(x.denominator))
    return mpc(x)


class BigComplex:
    """Complex number with an absolute error radius 2**err_exp"""

    __slots__ = ("value", "err_exp", "prec")

    def __init__(self, value, err_exp: Optional[int], prec: int):
        with working_precision(prec):
            self.value = _to_mpc(value)
        self.prec = int(prec)
        self.err_exp = _error_floor(prec) if err_exp is None else max(int(err_exp), _error_floor(prec))

    @classmethod
    def exact(cls, value, prec: int = DEFAULT_PREC + GUARD_BITS) -> "BigComplex":
        """Wrap an exactly known number; the only error is the final rounding"""
        with working_precision(prec):
            v = _to_mpc(value)
            return cls(v, _rounding(v, prec), prec)

    @property
    def re(self) -> mpf:
        return self.value.real

    @property
    def im(self) -> mpf:
        return self.value.imag

    def __repr__(self) -> str:
        with working_precision(self.prec):
            return f"BigComplex({mp.nstr(self.value, 20)}, err=2^{self.err_exp})"

    # arithmetic

    def _coerce(self, other) -> "BigComplex":
        if isinstance(other, BigComplex):
            return other
        return BigComplex.exact(other, self.prec)

    def __neg__(self) -> "BigComplex":
        with working_precision(self.prec):
            return BigComplex(-self.value, self.err_exp, self.prec)

    def __add__(self, other) -> "BigComplex":
        other = self._coerce(other)
        prec = max(self.prec, other.prec)
        with working_precision(prec):
            v = self.value + other.value
            err = _combine(self.err_exp, other.err_exp, _rounding(v, prec))
            return BigComplex(v, err, prec)

    __radd__ = __add__

    def __sub__(self, other) -> "BigComplex":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "BigComplex":
        return self._coerce(other) - self

    def __mul__(self, other) -> "BigComplex":
        other = self._coerce(other)
        prec = max(self.prec, other.prec)
        with working_precision(prec):
            v = self.value * other.value
            ma, mb = _mag(self.value), _mag(other.value)
            err = _combine(
                None if ma is None else ma + other.err_exp,
                None if mb is None else mb + self.err_exp,
                self.err_exp + other.err_exp,
                _rounding(v, prec),
            )
            return BigComplex(v, err, prec)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "BigComplex":
        other = self._coerce(other)
        prec = max(self.prec, other.prec)
        with working_precision(prec):
            low = _lower_mag(other.value)
            if low is None or other.err_exp > low - 1:
                raise PrecisionExhausted(
                    "Division by a value indistinguishable from zero",
                    {"divisor_err_exp": other.err_exp},
                )
            v = self.value / other.value
            mq = _mag(v)
            err = _combine(
                self.err_exp - (low - 1),
                None if mq is None else mq + other.err_exp - (low - 1),
                _rounding(v, prec),
            )
            return BigComplex(v, err, prec)

    def __rtruediv__(self, other) -> "BigComplex":
        return self._coerce(other) / self

    def __pow__(self, n: int) -> "BigComplex":
        if not isinstance(n, int):
            raise TypeError("BigComplex only supports integer powers")
        if n < 0:
            return 1 / (self ** (-n))
        result = BigComplex.exact(1, self.prec)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def conjugate(self) -> "BigComplex":
        with working_precision(self.prec):
            return BigComplex(mp.conj(self.value), self.err_exp, self.prec)

    # comparisons within error

    def mag(self) -> int:
        """Upper log2 bound for |value| + error"""
        with working_precision(self.prec):
            m = _mag(self.value)
        return int(_combine(m, self.err_exp))

    def abs_log2(self) -> Optional[float]:
        with working_precision(self.prec):
            if not self.value:
                return None
            return float(mp.log(abs(self.value), 2))

    def is_zero(self, slack: int = 1) -> bool:
        """True when 0 lies within the error disc (widened by 2**slack)"""
        with working_precision(self.prec):
            m = _mag(self.value)
            return m is None or abs(self.value) <= mpf(2) ** (self.err_exp + slack)

    def distance_log2(self, other) -> float:
        """log2 |self - other|, -inf when the centres coincide"""
        size = (self - self._coerce(other)).abs_log2()
        return float("-inf") if size is None else size

    def agrees_with(self, other, slack: int = 1) -> bool:
        """Error discs (widened by 2**slack) intersect"""
        other = self._coerce(other)
        diff = self - other
        with working_precision(diff.prec):
            bound = mpf(2) ** (max(self.err_exp, other.err_exp) + slack + 1)
            return abs(diff.value) <= bound

    def to_dict(self) -> dict:
        digits = int(self.prec * 0.30103) + 3
        with working_precision(self.prec):
            return {
                "re": mp.nstr(self.value.real, digits),
                "im": mp.nstr(self.value.imag, digits),
                "errExp": self.err_exp,
                "prec": self.prec,
            }

    @classmethod
    def from_dict(cls, data: dict) -> "BigComplex":
        prec = int(data["prec"])
        with working_precision(prec):
            value = mpc(mpf(data["re"]), mpf(data["im"]))
        return cls(value, int(data["errExp"]), prec)


Number = Union[BigComplex, int, float, complex, mpf, mpc]


def _precision_ladder(B: int) -> List[int]:
    return [B + GUARD_BITS, B + 2 * GUARD_BITS, B + 4 * GUARD_BITS, 2 * B + 4 * GUARD_BITS]


class LatticeBasis:
    """Ordered pair of periods (w1, w2); either orientation is accepted"""

    def __init__(self, w1: Number, w2: Number, prec: int = DEFAULT_PREC + GUARD_BITS):
        self.w1 = w1 if isinstance(w1, BigComplex) else BigComplex.exact(w1, prec)
        self.w2 = w2 if isinstance(w2, BigComplex) else BigComplex.exact(w2, prec)
        if self.w1.is_zero() or self.w2.is_zero():
            raise DegenerateLattice("Lattice periods must be nonzero")

    @classmethod
    def from_tau(cls, tau: Number, prec: int = DEFAULT_PREC + GUARD_BITS) -> "LatticeBasis":
        """The lattice Z*tau + Z"""
        return cls(tau, 1, prec)

    @property
    def prec(self) -> int:
        return max(self.w1.prec, self.w2.prec)

    def ratio(self) -> BigComplex:
        try:
            return self.w1 / self.w2
        except PrecisionExhausted as e:
            raise DegenerateLattice(f"Period w2 is indistinguishable from zero: {e}")

    def is_positively_oriented(self) -> bool:
        return self.ratio().im > 0

    def scaled(self, x: Number) -> "LatticeBasis":
        return LatticeBasis(self.w1 * x, self.w2 * x)


class ReducedLattice:
    """Lattice written as scale * (Z*tau + Z) with tau in the fundamental domain"""

    def __init__(self, tau: BigComplex, scale: BigComplex, unimodular: Unimodular):
        self.tau = tau
        self.scale = scale
        self.unimodular = unimodular

    @property
    def determinant(self) -> int:
        (a, b), (c, d) = self.unimodular
        return a * d - b * c

    def in_fundamental_domain(self) -> bool:
        with working_precision(self.tau.prec):
            slack = mpf(2) ** (self.tau.err_exp + 1)
            t = self.tau.value
            return (abs(t.real) <= mpf(1) / 2 + slack
                    and abs(t) >= 1 - slack
                    and t.imag >= mp.sqrt(3) / 2 - slack)

    def reproduces(self, basis: LatticeBasis) -> bool:
        """Applying the unimodular matrix to basis and dividing by scale gives (tau, 1)"""
        (a, b), (c, d) = self.unimodular
        new_w1 = basis.w1 * a + basis.w2 * b
        new_w2 = basis.w1 * c + basis.w2 * d
        return (new_w1 / self.scale).agrees_with(self.tau) and (new_w2 / self.scale).agrees_with(1)


def lattice_reduce(basis: LatticeBasis, B: Optional[int] = None) -> ReducedLattice:
    """Gauss-reduce w1/w2 into the standard fundamental domain"""
    B = B or max(basis.prec - GUARD_BITS, 64)
    W = B + GUARD_BITS
    with working_precision(W):
        ratio = basis.ratio()
        if abs(ratio.im) <= mpf(2) ** (ratio.err_exp + 1):
            raise DegenerateLattice("w1/w2 is real within the error radius",
                                    {"err_exp": ratio.err_exp})

        a, b, c, d = 1, 0, 0, 1
        tau = ratio.value
        if tau.imag < 0:
            a, b, c, d = 0, 1, 1, 0
            tau = 1 / tau

        tol = mpf(2) ** (-(B // 2))
        half = mpf(1) / 2
        for _ in range(MAX_REDUCTION_STEPS):
            n = int(mp.floor(tau.real + half))
            if n:
                tau -= n
                a, b = a - n * c, b - n * d
            if abs(tau) < 1 - tol:
                tau = -1 / tau
                a, b, c, d = -c, -d, a, b
                continue
            break
        else:
            raise DegenerateLattice("Lattice reduction did not terminate")

        new_w1 = basis.w1 * a + basis.w2 * b
        new_w2 = basis.w1 * c + basis.w2 * d
        reduced = new_w1 / new_w2

    logger.debug(f"Reduced lattice with matrix {((a, b), (c, d))}")
    return ReducedLattice(reduced, new_w2, ((a, b), (c, d)))


# q-series


def _eisenstein_series(t: mpc, tau_err: int, W: int):
    """E4, E6 at tau by Lambert series; returns values and error exponents"""
    q = mp.expj(2 * mp.pi * t)
    r = abs(q)
    if r >= mpf(1) / 100:
        raise DegenerateLattice("Eisenstein series need Im(tau) >= sqrt(3)/2")
    s4 = mpc(0)
    s6 = mpc(0)
    abs_sum = mpf(0)
    deriv4 = mpf(0)
    deriv6 = mpf(0)
    qn = q
    target = mpf(2) ** (-(W + 8))
    n = 1
    while True:
        denom = 1 - qn
        t4 = n ** 3 * qn / denom
        t6 = n ** 5 * qn / denom
        s4 += t4
        s6 += t6
        abs_sum += abs(t6)
        rn = abs(qn)
        deriv4 += n ** 4 * rn / (1 - rn) ** 2
        deriv6 += n ** 6 * rn / (1 - rn) ** 2
        # consecutive majorant terms shrink by at least half once r < 1/64
        tail = 2 * (n + 1) ** 7 * r ** (n + 1) / (1 - r) ** 2
        if tail < target:
            break
        n += 1
        if n > MAX_SERIES_TERMS:
            raise PrecisionExhausted("Eisenstein series truncation bound not reached")
        qn *= q

    e4 = 1 + 240 * s4
    e6 = 1 - 504 * s6
    rounding = (abs_sum + 1) * (n + 16) * mpf(2) ** (-W)
    two_pi = 2 * mp.pi
    err4 = 240 * (tail + rounding) + 240 * two_pi * (deriv4 + tail) * mpf(2) ** tau_err
    err6 = 504 * (tail + rounding) + 504 * two_pi * (deriv6 + tail) * mpf(2) ** tau_err
    return e4, e6, _mag(err4), _mag(err6), n


def eisenstein_invariants(tau: Number, B: int = DEFAULT_PREC) -> Tuple[BigComplex, BigComplex]:
    """g2 = 60 G4 and g3 = 140 G6 of the lattice Z*tau + Z, for reduced tau"""
    if B < 64:
        raise PrecisionExhausted("Bit budget must be at least 64", {"B": B})
    target = -(B - 32)
    for W in _precision_ladder(B):
        tau_bc = tau if isinstance(tau, BigComplex) else BigComplex.exact(tau, W)
        with working_precision(W):
            if tau_bc.value.imag < mp.sqrt(3) / 2 - mpf(2) ** (tau_bc.err_exp + 2):
                raise DegenerateLattice("eisenstein_invariants expects a reduced tau",
                                        {"im_tau": float(tau_bc.value.imag)})
            e4, e6, err4, err6, terms = _eisenstein_series(tau_bc.value, tau_bc.err_exp, W)
            pi = mp.pi
            c2 = BigComplex(4 * pi ** 4 / 3, _rounding(4 * pi ** 4, W) + 2, W)
            c3 = BigComplex(8 * pi ** 6 / 27, _rounding(8 * pi ** 6, W) + 2, W)
            g2 = c2 * BigComplex(e4, err4, W)
            g3 = c3 * BigComplex(e6, err6, W)
        if g2.err_exp <= target and g3.err_exp <= target:
            logger.debug(f"Eisenstein series: {terms} terms at {W} bits")
            return g2, g3
        logger.info(f"Escalating Eisenstein evaluation beyond {W} bits")
    raise PrecisionExhausted("Could not reach the target error for g2, g3", {"B": B})


def lattice_invariants(basis: LatticeBasis, B: int = DEFAULT_PREC) -> Tuple[BigComplex, BigComplex]:
    """g2, g3 of an arbitrary lattice via reduction and homogeneity"""
    red = lattice_reduce(basis, B)
    g2, g3 = eisenstein_invariants(red.tau, B)
    return g2 * red.scale ** -4, g3 * red.scale ** -6


def _wp_series(z: mpc, t: mpc, W: int, B: int, scale_log2: int):
    """p and p' on the lattice Z*t + Z for a reduced argument z"""
    two_pi_i = 2 * mp.pi * mpc(0, 1)
    u = mp.expj(2 * mp.pi * z)
    q = mp.expj(2 * mp.pi * t)
    r = abs(q)
    sqrt_r = mp.sqrt(r)

    one_minus_u = 1 - u
    s_p = mpf(1) / 12 + u / one_minus_u ** 2
    s_d = u * (1 + u) / one_minus_u ** 3
    abs_sum = abs(s_p) + abs(s_d)

    # tail of the three families beyond n: 6 r^(n+1/2) / ((1-sqrt r)^3 (1-r))
    tail_const = 6 / ((1 - sqrt_r) ** 3 * (1 - r))
    budget = mpf(2) ** (-(B + TAIL_GUARD_BITS) - max(scale_log2, 0) - 8)
    qn = q
    n = 1
    while True:
        x = qn * u
        y = qn / u
        fx = x / (1 - x) ** 2
        fy = y / (1 - y) ** 2
        fw = qn / (1 - qn) ** 2
        dx = x * (1 + x) / (1 - x) ** 3
        dy = y * (1 + y) / (1 - y) ** 3
        s_p += fx + fy - 2 * fw
        s_d += dx - dy
        abs_sum += abs(fx) + abs(fy) + abs(dx) + abs(dy)
        tail = tail_const * r ** n * sqrt_r
        if tail < budget:
            break
        n += 1
        if n > MAX_SERIES_TERMS:
            raise PrecisionExhausted("Weierstrass series truncation bound not reached")
        qn *= q

    rounding = (abs_sum + 1) * (n + 16) * mpf(2) ** (-W)
    err = tail + rounding
    wp_val = two_pi_i ** 2 * s_p
    wpp_val = two_pi_i ** 3 * s_d
    return wp_val, wpp_val, _mag(err * (2 * mp.pi) ** 2), _mag(err * (2 * mp.pi) ** 3), n


def wp_pair(z: Number, basis: LatticeBasis, B: int = DEFAULT_PREC,
            need_derivative: bool = True) -> Tuple[BigComplex, BigComplex]:
    """(p(z), p'(z)) on the lattice spanned by basis"""
    target = -(B - 32)
    for W in _precision_ladder(B):
        z_bc = z if isinstance(z, BigComplex) else BigComplex.exact(z, W)
        red = lattice_reduce(basis, W - GUARD_BITS)
        with working_precision(W):
            zs = z_bc / red.scale
            t = red.tau.value
            y = zs.value.imag / t.imag
            x = zs.value.real - y * t.real
            half = mpf(1) / 2
            m = int(mp.floor(y + half))
            n = int(mp.floor(x + half))
            zr = zs - red.tau * m - n
            if zr.is_zero(slack=2):
                raise PoleAtZ("z lies in the lattice within the error radius",
                              {"err_exp": zr.err_exp})

            scale_log2 = -min(_lower_mag(red.scale.value), 0) * 3
            p_val, d_val, p_err, d_err, terms = _wp_series(zr.value, t, W, B, scale_log2)

            # argument error: |p'| dz for p, |p''| dz for p'; p'' = 6p^2 - g2/2
            mp_d = _mag(d_val)
            p2 = _mag(6 * p_val ** 2) or 0
            tau_sens = _combine(_mag(p_val), mp_d, p2 + 1)
            p_err = _combine(p_err, None if mp_d is None else mp_d + zr.err_exp,
                             None if tau_sens is None else tau_sens + red.tau.err_exp + 2)
            d_err = _combine(d_err, p2 + 8 + zr.err_exp,
                             None if tau_sens is None else tau_sens + red.tau.err_exp + 2)

            wp_reduced = BigComplex(p_val, p_err, W)
            wpp_reduced = BigComplex(d_val, d_err, W)
            wp_val = wp_reduced * red.scale ** -2
            wpp_val = wpp_reduced * red.scale ** -3

        if wp_val.err_exp <= target and (not need_derivative or wpp_val.err_exp <= target):
            logger.debug(f"Weierstrass series: {terms} terms at {W} bits")
            return wp_val, wpp_val
        logger.info(f"Escalating Weierstrass evaluation beyond {W} bits")
    raise PrecisionExhausted("Could not reach the target error for p(z)", {"B": B})


def wp(z: Number, basis: LatticeBasis, B: int = DEFAULT_PREC) -> BigComplex:
    """Weierstrass p(z) on the lattice spanned by basis"""
    return wp_pair(z, basis, B, need_derivative=False)[0]


def wp_prime(z: Number, basis: LatticeBasis, B: int = DEFAULT_PREC) -> BigComplex:
    return wp_pair(z, basis, B)[1]


def j_invariant(tau: Number, B: int = DEFAULT_PREC) -> BigComplex:
    """j(tau) = 1728 g2^3 / (g2^3 - 27 g3^2), evaluated after reducing tau"""
    basis = LatticeBasis.from_tau(tau, B + GUARD_BITS)
    with working_precision(B + GUARD_BITS):
        if basis.w1.value.imag <= 0:
            raise DegenerateLattice("j_invariant needs Im(tau) > 0")
    red = lattice_reduce(basis, B)
    g2, g3 = eisenstein_invariants(red.tau, B)
    g2_cubed = g2 ** 3
    return g2_cubed * 1728 / (g2_cubed - g3 ** 2 * 27)
