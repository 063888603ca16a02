"""Command-line front end.

Subcommands: `attack` (one image), `batch` (a suite of images), `ablation`
(the suite under several search variants), `sweep` (exhaustive placement
scan), and `synth-oracle serve` (stand up the synthetic scoring service).

Exit codes: 0 success, 1 attack completed without fooling the model,
2 bad configuration, 3 query budget exhausted, 4 oracle unreachable.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from . import server as _server
from .evolution import VARIANTS
from .harness import (
    ConfigError,
    ablation,
    build_assets,
    emit_report,
    exhaustive_sweep,
    parse_attack_config,
    prepare_context,
    run_batch,
)
from .oracle import BudgetExhausted, RemoteError


def _add_common(p, workers=True, variant=True):
    p.add_argument("--config", metavar="FILE", help="JSON config file")
    p.add_argument("--seed", type=int, help="override the batch seed")
    p.add_argument("--budget", type=int, help="override the query budget")
    p.add_argument("--oracle-url", metavar="URL",
                   help="score against a remote service at this URL")
    p.add_argument("--out-dir", metavar="DIR", help="write report files here")
    if variant:
        p.add_argument("--variant", choices=VARIANTS,
                       help="override the search variant")
    if workers:
        p.add_argument("--workers", type=int, default=1,
                       help="parallel runs (default 1)")


def _read_config_file(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None


def _load_config(args):
    data = _read_config_file(args.config) if args.config else \
        {"oracle": {"kind": "synthetic"}}
    if args.seed is not None:
        data["batch_seed"] = args.seed
    if args.budget is not None:
        data["budget"] = args.budget
    if getattr(args, "variant", None):
        data.setdefault("search", {})["variant"] = args.variant
    if args.oracle_url:
        spec = data.get("oracle")
        if isinstance(spec, dict) and spec.get("kind") == "remote":
            spec["url"] = args.oracle_url
        else:
            data["oracle"] = {"kind": "remote", "url": args.oracle_url}
    return parse_attack_config(data)


def _normalize_item(config, raw, label=None):
    raw = "0" if raw is None else str(raw)
    if config.oracle["kind"] == "remote" and os.path.isfile(raw):
        return {"id": raw, "path": raw, "label": label}
    if raw.lstrip("-").isdigit():
        return int(raw)
    return raw


def _emit(args, report):
    if args.out_dir:
        paths = emit_report(report, args.out_dir)
        print(f"report written to {paths['json']}")


def cmd_attack(args):
    config = _load_config(args)
    item = _normalize_item(config, args.image, args.label)
    report = run_batch(config, items=[item], workers=1)
    _emit(args, report)
    row = report["runs"][0]
    print(f"{row['status']}: nq={row['nq']} position={row['position']} "
          f"angle={row['angle']} trigger={row['trigger']} "
          f"detail={row['detail']!r}")
    if row["status"] == "success":
        return 0
    if row["status"] == "error":
        return 4 if row["detail"].startswith("RemoteError") else 1
    if row["trigger"] == "budget_exhausted":
        return 3
    return 1


def cmd_batch(args):
    config = _load_config(args)
    report = run_batch(config, workers=args.workers)
    _emit(args, report)
    print(json.dumps(report["aggregates"]))
    return 0


def cmd_ablation(args):
    config = _load_config(args)
    if args.variants:
        variants = tuple(v.strip() for v in args.variants.split(","))
        unknown = set(variants) - set(VARIANTS)
        if unknown:
            raise ConfigError(f"unknown variants: {sorted(unknown)}")
    else:
        variants = VARIANTS
    report = ablation(config, variants=variants, workers=args.workers)
    _emit(args, report)
    for row in report["summary"]:
        print(json.dumps(row))
    return 0


def cmd_sweep(args):
    config = _load_config(args)
    item = _normalize_item(config, args.image)
    prepared = prepare_context(config, item, build_assets(config))
    if prepared.note is not None:
        print(f"cannot sweep: {prepared.note}", file=sys.stderr)
        return 1
    angle = args.angle if args.angle is not None else config.sweep_angle
    sweep = exhaustive_sweep(prepared.ctx, prepared.objective, prepared.mask,
                             angle=angle)
    _emit(args, sweep.to_report())
    print(f"n_queries={sweep.n_queries} o_star={list(sweep.o_star)} "
          f"successes={int(sweep.success_grid.sum())} "
          f"cluster={sweep.cluster_metric}")
    return 0


def cmd_serve(args):
    scorer = _server.build_scorer(seed=args.seed, size=args.size,
                                  gallery_size=args.gallery_size,
                                  n_bumps=args.n_bumps)
    server = _server.make_server(scorer, host=args.host, port=args.port)
    host, port = server.server_address[:2]
    print(f"serving synthetic oracle at http://{host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="advsticker",
        description="Black-box sticker-placement attacks on face scorers.")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("attack", help="attack a single image")
    _add_common(p, workers=False)
    p.add_argument("--image", help="item id (synthetic seed) or face PNG path")
    p.add_argument("--label", help="expected identity of the face")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("batch", help="attack every configured image")
    _add_common(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("ablation", help="run the suite under several variants")
    _add_common(p, variant=False)
    p.add_argument("--variants", metavar="A,B,...",
                   help=f"comma-separated subset of {','.join(VARIANTS)}")
    p.set_defaults(func=cmd_ablation)

    p = sub.add_parser("sweep", help="score every valid placement once")
    _add_common(p, workers=False, variant=False)
    p.add_argument("--image", help="item id (synthetic seed) or face PNG path")
    p.add_argument("--angle", type=float, help="sticker angle for the scan")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth-oracle", help="synthetic oracle service")
    synth_sub = p.add_subparsers(dest="action")
    q = synth_sub.add_parser("serve", help="serve the scoring HTTP API")
    q.add_argument("--host", default="127.0.0.1")
    q.add_argument("--port", type=int, default=8750)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--size", type=int, default=64)
    q.add_argument("--gallery-size", type=int, default=5)
    q.add_argument("--n-bumps", type=int, default=3)
    q.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BudgetExhausted as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return 3
    except RemoteError as exc:
        print(f"oracle unreachable: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
