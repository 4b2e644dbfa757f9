"""Command-line entry point.

Subcommands::

    edgecep serve --port P [--ws-port W] [--model FILE ...]
                  [--rules FILE] [--routes FILE] [--workdir DIR]
    edgecep run   --scenario FILE --out DIR
    edgecep bench --rules N [--events N] --op OP [--csv PATH]
                  [--kernel auto|python|cython|both] [--sweep]
    edgecep infer --model FILE --input CSV [--score]

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import _kernels, __version__
from .bench import BENCH_OPS, bench_throughput, compare_backends, \
    sweep_rule_counts, write_csv_row
from .errors import EdgecepError
from .nn import anomaly_score, infer, load_model
from .node import Node
from .scenario import default_config, load_config, run_scenario, \
    write_outputs
from .server import serve_forever
from .wire import WireError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgecep",
        description="complex event processing engine with runtime rule "
                    "injection and an online-learning model runtime")
    parser.add_argument("--version", action="version",
                        version=f"edgecep {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run one engine node")
    serve.add_argument("--port", type=int, required=True,
                       help="TCP line-protocol port")
    serve.add_argument("--ws-port", type=int, default=None,
                       help="HTTP port for the WebSocket endpoint and "
                            "console assets")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--model", action="append", default=[],
                       metavar="FILE", help="model file to load (repeat)")
    serve.add_argument("--rules", metavar="FILE",
                       help="rules file: one '<id> <rule text>' per line")
    serve.add_argument("--routes", metavar="FILE",
                       help="routes file: one '<event> <sink>' per line")
    serve.add_argument("--workdir", default=".",
                       help="directory for log/led sink files")
    serve.add_argument("--assets", default=None,
                       help="console asset directory (default: bundled)")
    serve.add_argument("--name", default="node")

    run = sub.add_parser("run", help="run the two-node scenario")
    run.add_argument("--scenario", metavar="FILE",
                     help="TOML config (omit for the built-in default)")
    run.add_argument("--out", required=True, metavar="DIR")

    bench = sub.add_parser("bench", help="throughput benchmark")
    bench.add_argument("--rules", type=int, default=1)
    bench.add_argument("--events", type=int, default=10000)
    bench.add_argument("--op", choices=BENCH_OPS, default="and")
    bench.add_argument("--csv", metavar="PATH")
    bench.add_argument("--kernel", default="auto",
                       choices=("auto", "python", "cython", "both"))
    bench.add_argument("--sweep", action="store_true",
                       help="sweep rule counts 1,2,3,4,5,10,15,20")

    inf = sub.add_parser("infer", help="run a model over CSV rows")
    inf.add_argument("--model", required=True, metavar="FILE")
    inf.add_argument("--input", required=True, metavar="CSV",
                     help="file with one comma-separated vector per line")
    inf.add_argument("--score", action="store_true",
                     help="print the anomaly score (autoencoders)")
    return parser


def _cmd_serve(args) -> int:
    node = Node(name=args.name, workdir=args.workdir)
    for path in args.model:
        model = load_model(Path(path).read_bytes())
        node.pool.add(model)
        print(f"loaded model {model.model_id!r} from {path}")
    boot = node.open_session()
    for attr, verb in (("rules", "RULE"), ("routes", "ROUTE")):
        path = getattr(args, attr)
        if not path:
            continue
        for ln, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("%", 1)[0].strip()
            if not line:
                continue
            responses = node.handle_line(boot, f"{verb} {line}")
            if responses[0].startswith("ERR"):
                print(f"{path}:{ln}: {responses[0]}", file=sys.stderr)
                return 2
    assets = args.assets
    if assets is None and args.ws_port is not None:
        bundled = Path(__file__).parent / "webui"
        assets = bundled if bundled.is_dir() else None
    tcp, web, _ = serve_forever(node, args.port, args.ws_port, assets,
                                args.host)
    print(f"listening on {args.host}:{tcp.port}"
          + (f", web on {args.host}:{web.port}" if web else ""))
    try:
        while True:
            import time
            time.sleep(3600)
    except KeyboardInterrupt:
        return 0
    finally:
        tcp.shutdown()
        if web:
            web.shutdown()
        node.close()


def _cmd_run(args) -> int:
    cfg = load_config(args.scenario) if args.scenario else default_config()
    result = run_scenario(cfg, workdir=args.out)
    write_outputs(result, args.out)
    emitted = sum(1 for e in result.trace if e.kind == "emitted")
    print(f"trace entries: {len(result.trace)} ({emitted} emissions), "
          f"alarms: {len(result.alarms)}")
    print(f"fine-tune separation: normal {result.fine_tune['normal_mean']:.3f} "
          f"vs anomalous {result.fine_tune['anomalous_mean']:.3f}")
    print(f"outputs written to {args.out}")
    return 0


def _cmd_bench(args) -> int:
    if args.rules < 1:
        print("bench: --rules must be >= 1", file=sys.stderr)
        return 1
    if args.kernel == "both":
        results = compare_backends(args.op, args.rules, args.events)
        for name in sorted(results):
            r = results[name]
            print(f"{args.op} rules={r.rules} kernel={name}: "
                  f"{r.events_per_s:.0f} events/s")
            if args.csv:
                write_csv_row(args.csv, r)
        return 0
    _kernels.activate(args.kernel)
    if args.sweep:
        for r in sweep_rule_counts(args.op, n_events=args.events,
                                   csv_path=args.csv):
            print(f"{args.op} rules={r.rules}: "
                  f"{r.events_per_s:.0f} events/s")
        return 0
    r = bench_throughput(args.op, args.rules, args.events,
                         csv_path=args.csv)
    print(f"{r.op} rules={r.rules} events={r.events} "
          f"kernel={r.kernel}: {r.events_per_s:.0f} events/s "
          f"({r.emissions} emissions in {r.elapsed_s:.3f}s)")
    return 0


def _cmd_infer(args) -> int:
    model = load_model(Path(args.model).read_bytes())
    for raw in Path(args.input).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        x = [float(v) for v in line.split(",")]
        out = infer(model, x)
        text = ",".join(repr(float(v)) for v in out)
        if args.score:
            text += f" score={anomaly_score(model, x)!r}"
        print(text)
    return 0


def cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help/--version, 2 for usage errors
        return 0 if exc.code == 0 else 1
    handler = {
        "serve": _cmd_serve,
        "run": _cmd_run,
        "bench": _cmd_bench,
        "infer": _cmd_infer,
    }[args.command]
    try:
        return handler(args)
    except (EdgecepError, WireError, OSError, ValueError) as exc:
        print(f"edgecep {args.command}: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli())


if __name__ == "__main__":
    main()
