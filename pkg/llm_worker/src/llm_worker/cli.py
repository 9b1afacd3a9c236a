"""Entry point: build the tiny default checkpoint and serve a worker."""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .adapter import LMAdapter
from .checkpoint import build_tiny_checkpoint
from .worker import serve

DEFAULT_MODEL_DIR = os.environ.get("LLM_WORKER_MODEL", "models/tiny-default")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="llm-worker")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-checkpoint", help="write the deterministic tiny model")
    p.add_argument("--out", default=DEFAULT_MODEL_DIR)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("serve", help="serve a model over the scoring protocol")
    p.add_argument("--model", default=DEFAULT_MODEL_DIR)
    p.add_argument("--listen", default="127.0.0.1:7071")
    p.add_argument("--frozen", action="store_true", help="disable the update capability")
    p.add_argument("--value-hidden-dim", type=int, default=1024)
    p.add_argument("--value-hidden-layers", type=int, default=3)

    args = parser.parse_args(argv)
    if args.command == "build-checkpoint":
        out = build_tiny_checkpoint(args.out, seed=args.seed)
        print(f"wrote tiny checkpoint to {out}")
        return 0
    if args.command == "serve":
        if not Path(args.model).exists():
            print(f"model directory {args.model!r} not found; run build-checkpoint first", file=sys.stderr)
            return 2
        adapter = LMAdapter(
            args.model,
            value_hidden_dim=args.value_hidden_dim,
            value_hidden_layers=args.value_hidden_layers,
        )
        host, _, port = args.listen.rpartition(":")
        print(f"serving {args.model} on {host or '0.0.0.0'}:{port}")
        serve(adapter, (host or "0.0.0.0", int(port)), trainable=not args.frozen)
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
