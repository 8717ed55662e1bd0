"""Start a bridge server around a named score function.

Loader specs:
  echo[:score]       constant score (default 0.5)
  baseline:<path>    the emexplain built-in similarity matcher from a model file
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from .server import BridgeConfig, ScoreFn, serve


def load_score_fn(spec: str) -> ScoreFn:
    kind, _, arg = spec.partition(":")
    if kind == "echo":
        value = float(arg) if arg else 0.5

        def echo(pairs):
            return [value] * len(pairs)

        return echo
    if kind == "baseline":
        if not arg:
            raise ValueError("baseline spec needs a model path: baseline:<path>")
        from emexplain.data import RecordPair
        from emexplain.matchers import BaselineMatcher, BaselineMatcherModel

        matcher = BaselineMatcher(BaselineMatcherModel.load(arg))

        def baseline(pairs):
            return matcher.predict_batch([RecordPair.from_json(p) for p in pairs])

        return baseline
    raise ValueError(f"unknown score spec {spec!r}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="embridge", description=__doc__)
    parser.add_argument("--score", default="echo", help="score function spec (echo[:v] | baseline:<path>)")
    parser.add_argument("--transport", choices=["stdio", "http"], default="stdio")
    parser.add_argument("--threshold", type=float, default=0.5)
    parser.add_argument("--max-batch", type=int, default=512)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8040)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr)
    try:
        score_fn = load_score_fn(args.score)
        config = BridgeConfig(
            transport=args.transport,
            threshold=args.threshold,
            max_batch=args.max_batch,
            host=args.host,
            port=args.port,
        )
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    serve(score_fn, config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
