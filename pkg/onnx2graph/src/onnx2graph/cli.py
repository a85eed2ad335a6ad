"""onnx2graph command line: convert ONNX models, verify graph documents."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .convert import ConvertError, convert
from .verify import verify_path


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="onnx2graph")
    sub = ap.add_subparsers(dest="command", required=True)

    conv = sub.add_parser("convert", help="convert an ONNX model to graph JSON")
    conv.add_argument("model", help="path to the .onnx file")
    conv.add_argument("-o", "--output", required=True, help="output graph JSON path")

    ver = sub.add_parser("verify", help="re-check all graph invariants on a JSON file")
    ver.add_argument("graph", help="path to the graph JSON file")

    args = ap.parse_args(argv)
    if args.command == "convert":
        try:
            report = convert(Path(args.model), Path(args.output))
        except ConvertError as e:
            print(f"error: {e}", file=sys.stderr)
            return 1
        print(f"converted {report.layers_converted} layers -> {args.output}")
        for op, count in report.ops_skipped:
            print(f"  folded {count} {op} node(s)")
        for w in report.warnings:
            print(f"  warning: {w}")
        return 0

    problems = verify_path(Path(args.graph))
    if problems:
        for p in problems:
            print(f"violation: {p}", file=sys.stderr)
        return 1
    print(f"{args.graph}: ok")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
