"""Launcher: `sam-backend --stub --bind 127.0.0.1:9000` or point it at a
checkpoint for real inference."""

from __future__ import annotations

import argparse
import sys

from .predictors import BackendConfig, load_predictor
from .server import create_app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sam-backend",
        description="Segmentation wire-protocol v1 backend.")
    parser.add_argument("--bind", default="127.0.0.1:9000",
                        help="host:port to listen on")
    parser.add_argument("--stub", action="store_true",
                        help="checkpoint-free identity-threshold mode")
    parser.add_argument("--checkpoint", help="model checkpoint path")
    parser.add_argument("--variant", default="vit_l",
                        help="model variant label (registry key)")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--queue-timeout-s", type=float, default=30.0,
                        help="max FIFO wait for a busy model")
    args = parser.parse_args(argv)

    if not args.stub and not args.checkpoint:
        parser.error("either --stub or --checkpoint is required")
    try:
        config = None
        if not args.stub:
            config = BackendConfig(checkpoint_path=args.checkpoint,
                                   model_variant=args.variant,
                                   device=args.device)
        predictor = load_predictor(stub=args.stub, config=config)
    except (FileNotFoundError, RuntimeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    host, _, port = args.bind.rpartition(":")
    import uvicorn

    uvicorn.run(create_app(predictor, args.queue_timeout_s),
                host=host or "127.0.0.1", port=int(port))
    return 0


if __name__ == "__main__":
    sys.exit(main())
