"""Thin command-line client for the run service.

Every command builds a resolved config (YAML file plus ``--set`` overrides)
and posts it to the HTTP API.  By default the app runs in-process; pass
``--url`` (or set $LATAD_SERVER_URL) to target a remote server started with
``latad serve``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any, Optional

import httpx

from .config import load_config, parse_override


def make_client(url: Optional[str]) -> httpx.Client:
    if url:
        return httpx.Client(base_url=url, timeout=None)
    from fastapi.testclient import TestClient  # in-process transport, same HTTP surface

    from .service import create_app

    return TestClient(create_app())


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key, e.g. --set training.max_epoch=5",
    )
    parser.add_argument("--run-dir", help="run directory (defaults to config out_dir)")
    parser.add_argument("--url", default=os.environ.get("LATAD_SERVER_URL"))
    parser.add_argument("--json", action="store_true", help="print the raw JSON response")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latad", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("synth", "preprocess", "train", "score", "evaluate"):
        _add_common(sub.add_parser(name))
    diag = sub.add_parser("diagnose")
    _add_common(diag)
    diag.add_argument(
        "--window",
        default="highest-score",
        help='test timestamp of the window end, or "highest-score"',
    )
    printer = sub.add_parser("print-config")
    printer.add_argument("--config", help="YAML config file")
    printer.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    server = sub.add_parser("serve")
    server.add_argument("--host", default="127.0.0.1")
    server.add_argument("--port", type=int, default=8432)
    return parser


def _resolved_config(args: argparse.Namespace):
    overrides = dict(parse_override(item) for item in args.overrides)
    return load_config(args.config, overrides)


def _post(args: argparse.Namespace, endpoint: str, payload: dict[str, Any]) -> dict[str, Any]:
    with make_client(args.url) as client:
        response = client.post(endpoint, json=payload)
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except Exception:
            detail = response.text
        raise SystemExit(f"error ({response.status_code}): {detail}")
    return response.json()


SUMMARY_KEYS = {
    "synth": ("run_dir", "train_rows", "test_rows", "anomaly_points"),
    "preprocess": ("run_dir", "train_len", "val_len", "test_len", "features"),
    "train": ("run_dir", "epochs_run", "aborted", "final_total_loss"),
    "score": ("run_dir", "threshold", "policy", "alerts"),
}


def _print_result(command: str, result: dict[str, Any], as_json: bool) -> None:
    if as_json:
        print(json.dumps(result, indent=2))
        return
    for key in SUMMARY_KEYS.get(command, ("run_dir",)):
        print(f"{key}: {result.get(key)}")
    if command == "evaluate" and result.get("report"):
        for name, metrics in result["report"]["variants"].items():
            print(f"{name}: f1={metrics['f1']:.4f} (threshold {metrics['threshold']:.6g})")
    if command == "evaluate" and result.get("state"):
        for key, value in result["state"].items():
            print(f"{key}: {value}")
    if command == "diagnose":
        for entry in result["report"]["ranking"]:
            print(f"feature {entry['name']}: dominant at {entry['count']} timesteps")
    artifacts = result.get("artifacts") or {}
    for name, rel in artifacts.items():
        print(f"  {name}: {result['run_dir']}/{rel}")


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "print-config":
        overrides = dict(parse_override(item) for item in args.overrides)
        print(load_config(args.config, overrides).to_yaml(), end="")
        return 0
    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    try:
        config = _resolved_config(args)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    payload: dict[str, Any] = {"config": config.model_dump(mode="json"), "run_dir": args.run_dir}
    if args.command == "diagnose":
        window = args.window
        payload["window"] = int(window) if str(window).lstrip("-").isdigit() else window
    try:
        result = _post(args, f"/{args.command}", payload)
    except SystemExit as exc:
        print(exc, file=sys.stderr)
        return 1
    except httpx.HTTPError as exc:
        print(f"request failed: {exc}", file=sys.stderr)
        return 1
    _print_result(args.command, result, args.json)
    return 0


if __name__ == "__main__":
    sys.exit(main())
