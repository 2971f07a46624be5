#!/usr/bin/env python3
"""
Heegner points on X1(N) - Main Entry Point
One subcommand per invocation, one report document on stdout
"""

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent / "src"))

from src.core.config import load_config
from src.core.errors import HeegnerError, UsageError
from src.core.runner import HeegnerRunner
from src.utils.formatters import EXIT_CODES, Formatter

CONFIG_FLAGS = ("prec_bits", "tol_log2", "cache_dir", "output_format", "log_level", "max_workers")


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting with status 2"""

    def error(self, message):
        raise UsageError(message, {"usage": self.format_usage().strip()})


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--prec-bits', type=int, dest='prec_bits')
    parser.add_argument('--tol-log2', type=int, dest='tol_log2')
    parser.add_argument('--cache-dir', dest='cache_dir')
    parser.add_argument('--format', choices=['json', 'text'], dest='output_format')
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], dest='log_level')
    parser.add_argument('--max-workers', type=int, dest='max_workers')
    parser.add_argument('--config', type=Path, dest='config_file', help='JSON defaults file')


def _add_point(parser: argparse.ArgumentParser, need_p: bool = False) -> None:
    parser.add_argument('--D', type=int, required=True)
    parser.add_argument('--N', type=int, required=True)
    parser.add_argument('--c', type=int, default=1)
    parser.add_argument('--a', type=int, default=0)
    if need_p:
        parser.add_argument('--p', type=int, required=True)
        parser.add_argument('--case', choices=['auto', 'inert', 'p-divides-c'], default='auto')


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog='heegner-x1n', description='Heegner points on X1(N): models, CM values, checks')
    sub = parser.add_subparsers(dest='command', parser_class=CliParser)

    p = sub.add_parser('eval-point', help='P_tau = (b, c) at tau\' = (a + tauK)/c')
    _add_point(p)
    p = sub.add_parser('rawform', help='defining polynomial of X1(N) in b, c')
    p.add_argument('--N', type=int, required=True)
    p = sub.add_parser('nmult', help='nP on the Tate normal form')
    p.add_argument('--n', type=int, required=True)
    p = sub.add_parser('classgroup', help='reduced forms of discriminant c^2 dK')
    p.add_argument('--D', type=int, required=True)
    p.add_argument('--c', type=int, default=1)
    p = sub.add_parser('splitting', help='decomposition of p in K')
    p.add_argument('--D', type=int, required=True)
    p.add_argument('--p', type=int, required=True)
    p.add_argument('--N', type=int)
    p.add_argument('--c', type=int, default=1)
    p = sub.add_parser('cosets', help='coset representatives for the conductor raise')
    p.add_argument('--D', type=int, required=True)
    p.add_argument('--c', type=int, default=1)
    p.add_argument('--a', type=int, default=0)
    p.add_argument('--p', type=int, required=True)
    p.add_argument('--case', choices=['auto', 'inert', 'p-divides-c'], default='auto')
    p = sub.add_parser('verify-sj', help='local lattice identities for s_j')
    _add_point(p, need_p=True)
    p.add_argument('--multiplier', choices=['tau'], help='corrupt the multiplier (negative control)')
    p = sub.add_parser('verify-distribution', help='layered distribution relation check')
    _add_point(p, need_p=True)
    p.add_argument('--mode', choices=['symmetric', 'orbit', 'record'])
    p.add_argument('--degree-bound', type=int, dest='degree_bound')
    p.add_argument('--replace', type=int, help='replace this fiber point (negative control)')
    p.add_argument('--beta-file', dest='beta_file', help='externally sourced beta_Q matrices (JSON)')
    p = sub.add_parser('fiber', help='T_p fiber points')
    _add_point(p, need_p=True)
    p = sub.add_parser('vienna', help='b, c with 1/N replaced by C/N, C = t + s*theta')
    p.add_argument('--D', type=int, required=True)
    p.add_argument('--N', type=int, required=True)
    p.add_argument('--t', type=int, required=True)
    p.add_argument('--s', type=int, default=0)
    p = sub.add_parser('galois-orbit', help='orbit of P_theta under W_{N,theta}')
    p.add_argument('--D', type=int, required=True)
    p.add_argument('--N', type=int, required=True)
    p = sub.add_parser('minpoly', help='recognize an algebraic number')
    p.add_argument('--value', help="'re,im' in decimal")
    p.add_argument('--constant', help='pi, e, golden or sqrt2')
    p.add_argument('--err-exp', type=int, dest='err_exp')
    p.add_argument('--max-deg', type=int, default=8, dest='max_deg')
    p.add_argument('--height-bits', type=int, dest='height_bits')
    p = sub.add_parser('invariance', help='Gamma1(N) invariance of b and c')
    p.add_argument('--N', type=int, required=True)
    p.add_argument('--tau', action='append', dest='taus', help="'re,im'; repeatable")
    p.add_argument('--negative-control', action='store_true', dest='negative_control')
    p = sub.add_parser('tate-j', help='j(E(b, c)) against j(tau)')
    _add_point(p)
    p = sub.add_parser('batch', help='JSON list of {"command", "args"} requests')
    p.add_argument('--requests', type=Path, required=True)

    for action in sub.choices.values():
        _add_common(action)
    return parser


def _usage_report(error: HeegnerError) -> Dict[str, Any]:
    return {"verdict": "usage", "maxMatchError": None, "errors": [error.to_dict()], "warnings": [],
            "_meta": {"command": None, "exitCode": EXIT_CODES["usage"]}}


async def main_async(argv: Optional[List[str]] = None) -> int:
    """Main async entry point"""
    try:
        ns = build_parser().parse_args(argv)
        if ns.command is None:
            raise UsageError("No subcommand given")
        flags = {k: getattr(ns, k, None) for k in CONFIG_FLAGS}
        config = load_config(flags, defaults_path=ns.config_file) if ns.config_file else load_config(flags)
    except HeegnerError as e:
        print(Formatter.format_report(_usage_report(e), 'json'))
        return EXIT_CODES["usage"]

    logging.basicConfig(
        level=getattr(logging, str(config.log_level).upper(), logging.WARNING),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )
    runner = HeegnerRunner(config)
    args = {k: v for k, v in vars(ns).items() if k not in CONFIG_FLAGS + ("command", "config_file")}
    args["prec_bits"] = ns.prec_bits

    if ns.command == 'batch':
        try:
            report = await runner.run_batch_file_async(ns.requests)
        except HeegnerError as e:
            report = _usage_report(e)
    else:
        report = await runner.run_async(ns.command, args)
    print(Formatter.format_report(report, config.output_format))
    return report["_meta"]["exitCode"]


def main():
    """Main synchronous entry point"""
    try:
        code = asyncio.run(main_async())
    except KeyboardInterrupt:
        print("\nShutdown requested...", file=sys.stderr)
        code = EXIT_CODES["inconclusive"]
    sys.exit(code)


if __name__ == "__main__":
    main()
