"""Output formatting utilities"""

import json
import math
from typing import Any, Dict, List

EXIT_CODES = {"verified": 0, "success": 0, "falsified": 1, "inconclusive": 2, "usage": 3}


class Formatter:
    """Renders reports as JSON documents or plain-text tables"""

    @staticmethod
    def exit_code(report: Dict[str, Any]) -> int:
        """Exit code as a function of the verdict alone"""
        return EXIT_CODES.get(report.get("verdict", "usage"), 3)

    @staticmethod
    def format_report(report: Dict[str, Any], output_format: str = 'json') -> str:
        if output_format == 'json':
            return json.dumps(Formatter._json_safe(report), indent=2, ensure_ascii=False, default=str,
                              allow_nan=False)
        return Formatter._format_plain(report)

    @staticmethod
    def _json_safe(value: Any) -> Any:
        """Exact agreement (-inf distance) and other non-finite floats become null"""
        if isinstance(value, float) and not math.isfinite(value):
            return None
        if isinstance(value, dict):
            return {k: Formatter._json_safe(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [Formatter._json_safe(v) for v in value]
        return value

    @staticmethod
    def _scalar(value: Any) -> str:
        if isinstance(value, dict) and {"re", "im"} <= set(value):
            return f"{value['re'][:24]} + {value['im'][:24]}i (err 2^{value.get('errExp')})"
        if isinstance(value, (dict, list)):
            return json.dumps(value, default=str)
        return str(value)

    @staticmethod
    def _format_plain(report: Dict[str, Any]) -> str:
        meta = report.get("_meta", {})
        output: List[str] = [f"{meta.get('command', 'report')}: {report.get('verdict', 'unknown').upper()}\n",
                             "=" * 50, "\n\n"]

        if report.get("errors"):
            output.append("ERRORS:\n")
            for error in report["errors"]:
                message = error.get("message") if isinstance(error, dict) else error
                output.append(f"  - {message}\n")
            output.append("\n")

        if report.get("warnings"):
            output.append("WARNINGS:\n")
            for warning in report["warnings"]:
                output.append(f"  - {warning}\n")
            output.append("\n")

        width = max((len(k) for k in report), default=0)
        for key, value in report.items():
            if key in ("errors", "warnings", "_meta", "layers"):
                continue
            output.append(f"{key.ljust(width)}  {Formatter._scalar(value)}\n")

        for name, layer in report.get("layers", {}).items():
            output.append(f"\n[{name}] {layer.get('verdict', '')}\n")
            for key, value in layer.items():
                if key != "verdict":
                    output.append(f"  {key}: {Formatter._scalar(value)}\n")

        if meta:
            output.append(f"\nprecBits={meta.get('precBits')} elapsed={meta.get('elapsed', 0):.2f}s\n")
        return ''.join(output)
