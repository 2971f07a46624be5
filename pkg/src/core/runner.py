"""Command dispatch for the CLI and batch requests"""

import asyncio
import json
import logging
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from mpmath import mp, mpc, mpf
from sympy import isprime

from .config import RunConfig
from .errors import (DivisionFails, Falsified, HeegnerError, InvalidConfig, NumericError, PrecisionExhausted,
                     UsageError)
from .pipeline import VerificationPipeline
from ..heegner import cmfields, eulerlab, galoisact, modelgen
from ..heegner.numkernel import BigComplex, GUARD_BITS, working_precision
from ..utils.formatters import Formatter

COMMANDS = (
    "eval-point", "rawform", "nmult", "classgroup", "splitting", "cosets", "verify-sj",
    "verify-distribution", "vienna", "galois-orbit", "minpoly", "invariance", "tate-j", "fiber", "batch",
)

NAMED_CONSTANTS = {
    "pi": lambda: mp.pi,
    "e": lambda: mp.e,
    "golden": lambda: (1 + mp.sqrt(5)) / 2,
    "sqrt2": lambda: mp.sqrt(2),
}


def _require(args: Dict[str, Any], *names: str) -> None:
    missing = [n for n in names if args.get(n) is None]
    if missing:
        raise UsageError(f"Missing required argument(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")


def _case_tag(args: Dict[str, Any]) -> Optional[str]:
    case = args.get("case")
    if case in (None, "auto"):
        return None
    aliases = {"inert": cmfields.INERT, "p-divides-c": cmfields.P_DIVIDES_C}
    return aliases.get(case, case)


def _spec(args: Dict[str, Any]) -> eulerlab.CMPointSpec:
    _require(args, "D", "N")
    return eulerlab.CMPointSpec(args["D"], args.get("c") or 1, args.get("a") or 0, args["N"])


def _instance(args: Dict[str, Any]) -> eulerlab.DistributionInstance:
    _require(args, "D", "N", "p")
    return eulerlab.build_instance(args["D"], args["N"], args.get("c") or 1, args.get("a") or 0, args["p"],
                                   _case_tag(args))


def _parse_complex(text: str) -> mpc:
    """'re,im' or 're' in decimal"""
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) > 2:
        raise UsageError(f"Cannot parse complex number {text!r}")
    try:
        return mpc(mpf(parts[0]), mpf(parts[1]) if len(parts) == 2 else 0)
    except ValueError:
        raise UsageError(f"Cannot parse complex number {text!r}")


class HeegnerRunner:
    """Dispatches one command (or a batch of requests) to the module operations"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.pipeline = VerificationPipeline(config)
        self.logger = logging.getLogger(__name__)
        self._handlers: Dict[str, Callable[[Dict[str, Any]], Dict[str, Any]]] = {
            "eval-point": self.handle_eval_point,
            "rawform": self.handle_rawform,
            "nmult": self.handle_nmult,
            "classgroup": self.handle_classgroup,
            "splitting": self.handle_splitting,
            "cosets": self.handle_cosets,
            "verify-sj": self.handle_verify_sj,
            "verify-distribution": self.handle_verify_distribution,
            "vienna": self.handle_vienna,
            "galois-orbit": self.handle_galois_orbit,
            "minpoly": self.handle_minpoly,
            "invariance": self.handle_invariance,
            "tate-j": self.handle_tate_j,
            "fiber": self.handle_fiber,
        }

    def _bits(self, args: Dict[str, Any]) -> int:
        return int(args.get("prec_bits") or self.config.prec_bits)

    # symbolic and arithmetic commands

    def handle_rawform(self, args: Dict[str, Any]) -> Dict[str, Any]:
        _require(args, "N")
        poly = modelgen.raw_form(args["N"], self.config.max_raw_form_level, self.config.max_raw_form_degree)
        return {"verdict": "success", "N": args["N"], "rawForm": modelgen.format_poly(poly),
                "degree": modelgen.total_degree(poly), "terms": modelgen.poly_terms(poly)}

    def handle_nmult(self, args: Dict[str, Any]) -> Dict[str, Any]:
        _require(args, "n")
        point = modelgen.tate_multiple(args["n"])
        return {"verdict": "success", "n": args["n"], **point.to_dict()}

    def handle_classgroup(self, args: Dict[str, Any]) -> Dict[str, Any]:
        _require(args, "D")
        field = cmfields.field_data(args["D"])
        conductor = args.get("c") or 1
        disc = conductor ** 2 * field.dK
        return {"verdict": "success", "field": field.to_dict(), "conductor": conductor, "disc": disc,
                "classNumber": cmfields.class_number(field.dK, conductor),
                "forms": [f.to_dict() for f in cmfields.reduced_forms(disc)]}

    def handle_splitting(self, args: Dict[str, Any]) -> Dict[str, Any]:
        _require(args, "D", "p")
        field = cmfields.field_data(args["D"])
        if not isprime(args["p"]):
            raise UsageError(f"p={args['p']} is not prime")
        report = {"verdict": "success", "D": field.D, "dK": field.dK, "p": args["p"],
                  "splitting": cmfields.prime_splitting(args["p"], field)}
        if args.get("N") is not None:
            try:
                splits, degree = cmfields.ramification_profile(field, args.get("c") or 1, args["p"], args["N"])
                report["ramificationProfile"] = {"splitsCompletely": splits, "degree": degree}
            except HeegnerError as e:
                report["ramificationProfile"] = e.to_dict()
        return report

    def handle_cosets(self, args: Dict[str, Any]) -> Dict[str, Any]:
        _require(args, "D", "p")
        field = cmfields.field_data(args["D"])
        c, a, p = args.get("c") or 1, args.get("a") or 0, args["p"]
        tag = _case_tag(args) or (cmfields.P_DIVIDES_C if c % p == 0 else cmfields.INERT)
        tau_prime = (field.tau_k + a) / c
        reps = cmfields.conductor_raise_cosets(field, c, p, tag, tau_prime)
        report = cmfields.cosets_distinct_check(reps, p, tag, c=c)
        report["representatives"] = [r.to_dict() for r in reps]
        return report

    def handle_verify_sj(self, args: Dict[str, Any]) -> Dict[str, Any]:
        instance = _instance(args)
        spec = instance.spec
        return cmfields.verify_sj_lattices(spec.field, spec.c, spec.a, instance.p, instance.case_tag, N=spec.N,
                                           multiplier=args.get("multiplier"))

    # numeric commands

    def handle_eval_point(self, args: Dict[str, Any]) -> Dict[str, Any]:
        spec = _spec(args)
        point = self.pipeline.eval_point_cached(spec, self._bits(args))
        return {"verdict": "success", "point": point.to_dict(), "maxMatchError": point.residual_log2()}

    def handle_tate_j(self, args: Dict[str, Any]) -> Dict[str, Any]:
        spec = _spec(args)
        bits = self._bits(args)
        point = eulerlab.eval_point(spec, bits, max_level=self.config.max_raw_form_level)
        report = eulerlab.j_consistency(point, spec.tau_prime, bits)
        report["point"] = point.to_dict()
        return report

    def handle_fiber(self, args: Dict[str, Any]) -> Dict[str, Any]:
        instance = _instance(args)
        fiber = asyncio.run(self.pipeline.tp_fiber_async(instance, self._bits(args)))
        residuals = [pt.residual_log2() for pt in fiber.all_points()]
        finite = [r for r in residuals if r is not None]
        return {"verdict": "success", "fiberSize": len(fiber), "fiber": fiber.to_dict(),
                "maxMatchError": max(finite) if finite else None}

    def handle_verify_distribution(self, args: Dict[str, Any]) -> Dict[str, Any]:
        instance = _instance(args)
        beta = None
        if args.get("beta_file"):
            beta = galoisact.load_beta_data(Path(args["beta_file"]), instance.spec.N)
        return self.pipeline.verify_distribution(
            instance, B=self._bits(args), mode=args.get("mode"), bound=args.get("degree_bound"),
            replace_position=args.get("replace"), beta_data=beta)

    def handle_vienna(self, args: Dict[str, Any]) -> Dict[str, Any]:
        _require(args, "D", "N", "t", "s")
        field = cmfields.field_data(args["D"])
        N, bits = args["N"], self._bits(args)
        C = field.element(args["t"]) + field.theta * args["s"]
        point = galoisact.vienna_act(C, field.theta, N, bits)
        report = {"verdict": "success", "C": C.to_dict(), "point": point.to_dict(), "maxMatchError": None}
        if field.dK <= galoisact.MAX_SUPPORTED_DK:
            matrix = galoisact.WMatrix(args["t"], args["s"], N, field)
            via_matrix = galoisact.point_under_matrix(galoisact.GaloisElement(matrix), N, bits)
            distance = point.distance_log2(via_matrix)
            agree = point.agrees_with(via_matrix, slack=8)
            report.update({"verdict": "verified" if agree else "falsified", "matrix": matrix.to_dict(),
                           "maxMatchError": distance})
        return report

    def handle_galois_orbit(self, args: Dict[str, Any]) -> Dict[str, Any]:
        _require(args, "D", "N")
        field = cmfields.field_data(args["D"])
        return asyncio.run(self.pipeline.orbit_report_async(field, args["N"], self._bits(args)))

    def handle_minpoly(self, args: Dict[str, Any]) -> Dict[str, Any]:
        bits = self._bits(args)
        W = bits + GUARD_BITS
        with working_precision(W):
            if args.get("constant"):
                if args["constant"] not in NAMED_CONSTANTS:
                    raise UsageError(f"Unknown constant {args['constant']!r}; known: {sorted(NAMED_CONSTANTS)}")
                value = mpc(NAMED_CONSTANTS[args["constant"]]())
            else:
                _require(args, "value")
                value = _parse_complex(args["value"])
        x = BigComplex.exact(value, W) if args.get("err_exp") is None else BigComplex(value, args["err_exp"], W)
        max_deg = int(args.get("max_deg") or 8)
        height_bits = int(args.get("height_bits") or self.config.height_bits)
        poly = eulerlab.min_poly_guess(x, max_deg, 2 ** height_bits)
        return {
            "verdict": "success",
            "recognized": poly is not None,
            "poly": None if poly is None else str(poly.as_expr()),
            "degree": None if poly is None else poly.degree(),
            "errExp": x.err_exp,
            "maxMatchError": None,
        }

    def handle_invariance(self, args: Dict[str, Any]) -> Dict[str, Any]:
        _require(args, "N")
        N = args["N"]
        taus = [_parse_complex(t) for t in (args.get("taus") or ["0.1,0.8", "-0.3,1.1", "0.45,0.95"])]
        matrices = [((1, 1), (0, 1)), ((1, 0), (N, 1))]
        if args.get("negative_control"):
            matrices.append(((1, 0), (1, 1)))
        return eulerlab.gamma1_invariance_check(N, taus, matrices, self._bits(args))

    # dispatch

    def run(self, command: str, args: Dict[str, Any]) -> Dict[str, Any]:
        """Run one command; HeegnerError is folded into the report"""
        start = time.time()
        handler = self._handlers.get(command)
        try:
            if handler is None:
                raise UsageError(f"Unknown command: {command}", {"known": list(self._handlers)})
            report = handler(args)
        except PrecisionExhausted as e:
            self.logger.error(f"{command}: {e.message}")
            report = {"verdict": "inconclusive", "errors": [e.to_dict()]}
        except (Falsified, DivisionFails) as e:
            self.logger.error(f"{command}: {e.message}")
            report = {"verdict": "falsified", "errors": [e.to_dict()]}
        except NumericError as e:
            self.logger.error(f"{command}: {e.message}")
            report = {"verdict": "inconclusive", "errors": [e.to_dict()]}
        except HeegnerError as e:
            self.logger.error(f"{command}: {e.message}")
            report = {"verdict": "usage", "errors": [e.to_dict()]}
        except ValueError as e:
            self.logger.error(f"{command}: {e}")
            report = {"verdict": "usage", "errors": [{"type": "ValueError", "message": str(e)}]}

        report.setdefault("maxMatchError", None)
        report.setdefault("errors", [])
        report.setdefault("warnings", [])
        report["_meta"] = {
            "command": command,
            "precBits": self._bits(args),
            "elapsed": time.time() - start,
            "exitCode": Formatter.exit_code(report),
        }
        return report

    async def run_async(self, command: str, args: Dict[str, Any]) -> Dict[str, Any]:
        loop = asyncio.get_event_loop()
        return await loop.run_in_executor(None, self.run, command, args)

    async def process_request_async(self, request: Dict[str, Any]) -> Dict[str, Any]:
        """{"command": ..., "args": {...}} with snake_case argument names"""
        command = request.get("command")
        args = request.get("args", {})
        if command == "batch":
            return {"verdict": "usage", "maxMatchError": None, "warnings": [],
                    "errors": [{"type": "UsageError", "message": "batch requests cannot nest"}],
                    "_meta": {"command": command, "exitCode": 3}}
        return await self.run_async(command, args)

    async def run_batch_async(self, requests: List[Dict[str, Any]]) -> Dict[str, Any]:
        start = time.time()
        reports = await asyncio.gather(*(self.process_request_async(r) for r in requests))
        codes = [r["_meta"]["exitCode"] for r in reports]
        worst = max(codes) if codes else 0
        verdict = {0: "success", 1: "falsified", 2: "inconclusive"}.get(worst, "usage")
        return {
            "verdict": verdict,
            "maxMatchError": None,
            "reports": list(reports),
            "errors": [],
            "warnings": [],
            "_meta": {"command": "batch", "count": len(reports), "elapsed": time.time() - start,
                      "precBits": self.config.prec_bits, "exitCode": worst},
        }

    async def run_batch_file_async(self, path: Path) -> Dict[str, Any]:
        try:
            requests = json.loads(Path(path).read_text(encoding='utf-8'))
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"Cannot read batch requests from {path}: {e}")
        if not isinstance(requests, list):
            raise UsageError("Batch file must hold a JSON list of requests")
        return await self.run_batch_async(requests)

    def configure(self, new_config: Dict[str, Any]) -> RunConfig:
        """Update the running configuration; InvalidConfig leaves it unchanged"""
        previous = self.config.to_dict()
        try:
            self.config.update_config(new_config)
            self.config.validate()
        except InvalidConfig:
            self.config.update_config(previous)
            raise
        self.pipeline = VerificationPipeline(self.config)
        return self.config
