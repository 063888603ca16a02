"""Command-line entry point: serve the scoring API over HTTP."""

import argparse

import uvicorn

from .backbone import EMBED_DIM, INPUT_SIZE
from .service import DEFAULT_TEMPERATURE, create_app


def build_parser():
    parser = argparse.ArgumentParser(
        prog="scorer-service",
        description="Face-recognition scoring service with an enrollable "
                    "gallery. Enroll identities via POST /gallery, then "
                    "score probes via POST /score.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--seed", type=int, default=0,
                        help="backbone weight seed (default 0)")
    parser.add_argument("--temperature", type=float,
                        default=DEFAULT_TEMPERATURE,
                        help="softmax sharpness over cosine similarities "
                             f"(default {DEFAULT_TEMPERATURE})")
    parser.add_argument("--embed-dim", type=int, default=EMBED_DIM,
                        help=f"embedding width (default {EMBED_DIM})")
    parser.add_argument("--input-size", type=int, default=INPUT_SIZE,
                        help="square model input resolution "
                             f"(default {INPUT_SIZE})")
    parser.add_argument("--log-level", default="info")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    app = create_app(seed=args.seed, temperature=args.temperature,
                     embed_dim=args.embed_dim, input_size=args.input_size)
    uvicorn.run(app, host=args.host, port=args.port,
                log_level=args.log_level)


if __name__ == "__main__":
    main()
