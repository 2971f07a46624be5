"""Numeric kernel, X1(N) models, CM field arithmetic, Galois action and distribution checks"""

from .numkernel import BigComplex, LatticeBasis, lattice_reduce, wp, wp_prime, j_invariant
from .modelgen import raw_form, tate_add, tate_multiple, optimized_model_check
from .cmfields import ImagQuadField, KElement, cosets_distinct_check, verify_sj_lattices
from .galoisact import WMatrix, FrickeIndex, GaloisElement, w_group, act_index, point_under_matrix, vienna_act
from .eulerlab import CMPointSpec, DistributionInstance, eval_point, tp_fiber, verify_distribution
from .points import EvaluatedPoint

__all__ = [
    "BigComplex", "LatticeBasis", "lattice_reduce", "wp", "wp_prime", "j_invariant",
    "raw_form", "tate_add", "tate_multiple", "optimized_model_check",
    "ImagQuadField", "KElement", "cosets_distinct_check", "verify_sj_lattices",
    "WMatrix", "FrickeIndex", "GaloisElement", "w_group", "act_index", "point_under_matrix", "vienna_act",
    "CMPointSpec", "DistributionInstance", "eval_point", "tp_fiber", "verify_distribution",
    "EvaluatedPoint",
]
