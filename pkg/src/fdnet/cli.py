"""Command-line interface: flops, bench, run, gen-weights, export-arch."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import arch, bench, complexity
from .engine import compile, init_random_weights, load_image, preprocess, WeightStore

MODELS = tuple(arch.BUILDERS)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",")]


def _write(out: str | None, data: str | bytes) -> None:
    if out is None or out == "-":
        if isinstance(data, bytes):
            sys.stdout.buffer.write(data)
        else:
            sys.stdout.write(data)
        return
    Path(out).write_bytes(data if isinstance(data, bytes) else data.encode())


def cmd_flops(args) -> int:
    report = complexity.stage_report(arch.check(arch.build(args.model, args.alpha)))
    if args.format == "csv":
        _write(None, complexity.format_csv(report))
    else:
        _write(None, complexity.format_text(report, per_layer=args.per_layer))
    return 0


def cmd_bench(args) -> int:
    configs = bench.TABLE4_SUITE if args.model == "table4" else [(args.model, args.alpha)]
    reports = bench.run_suite(configs, warmup=args.warmup, runs=args.runs, seed=args.seed, threads=args.threads)
    text = bench.format_csv(reports) if args.format == "csv" else bench.format_text(reports)
    _write(args.out, text)
    return 0


def _load_spec(args) -> arch.ArchitectureSpec:
    if args.arch:
        return arch.import_json(Path(args.arch).read_text())
    if args.model is None:
        raise ValueError("give either --arch JSON or --model")
    return arch.build(args.model, args.alpha)


def cmd_run(args) -> int:
    spec = _load_spec(args)
    store = WeightStore.from_bytes(Path(args.weights).read_bytes())
    engine = compile(spec, store)
    image = load_image(Path(args.image).read_bytes())
    wanted = spec.input.as_tuple()
    if args.preprocess == "always" or (args.preprocess == "auto" and image.shape.as_tuple() != wanted):
        crop = spec.input.h
        image = preprocess(image, short_side=args.short_side, crop=crop, max_value=args.max_value,
                           mean=args.mean, std=args.std)
    with threadpool_limits(limits=args.threads):
        probs = engine.infer(image).data
    k = min(args.topk, probs.size)
    # stable sort so ties (e.g. a uniform distribution) list in class order
    order = np.argsort(-probs.astype(np.float64), kind="stable")[:k]
    if args.format == "csv":
        lines = ["rank,class,probability"] + [f"{r},{c},{probs[c]:.9f}" for r, c in enumerate(order, 1)]
    else:
        lines = [f"{'rank':>4} {'class':>5}  probability"] + [f"{r:>4} {c:>5}  {probs[c]:.9f}" for r, c in enumerate(order, 1)]
    _write(None, "\n".join(lines) + "\n")
    return 0


def cmd_gen_weights(args) -> int:
    spec = arch.check(arch.build(args.model, args.alpha))
    _write(args.out, init_random_weights(spec, args.seed).to_bytes())
    return 0


def cmd_export_arch(args) -> int:
    spec = arch.check(arch.build(args.model, args.alpha))
    _write(args.out, arch.export_json(spec))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fdnet", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def model_args(sp, choices=MODELS):
        sp.add_argument("model", choices=choices)
        sp.add_argument("--alpha", type=float, default=1.0, help="width multiplier")

    sp = sub.add_parser("flops", help="per-stage MAC report")
    model_args(sp)
    sp.add_argument("--format", choices=("text", "csv"), default="text")
    sp.add_argument("--per-layer", action="store_true", help="also list every layer (text format)")
    sp.set_defaults(func=cmd_flops)

    sp = sub.add_parser("bench", help="single-image latency benchmark")
    model_args(sp, MODELS + ("table4",))
    sp.add_argument("--warmup", type=int, default=5)
    sp.add_argument("--runs", type=int, default=30)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--format", choices=("text", "csv"), default="text")
    sp.add_argument("--out", help="write the report here instead of stdout")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("run", help="classify one image")
    sp.add_argument("--arch", help="architecture JSON (alternative to --model)")
    sp.add_argument("--model", choices=MODELS)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--weights", required=True, help="FDW1 weight file")
    sp.add_argument("--image", required=True, help="P6 PPM or FDT1 tensor")
    sp.add_argument("--topk", type=int, default=5)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--format", choices=("text", "csv"), default="text")
    sp.add_argument("--preprocess", choices=("auto", "always", "never"), default="auto",
                    help="auto: resize/crop unless the image already has the network input shape")
    sp.add_argument("--short-side", type=int, default=256)
    sp.add_argument("--max-value", type=float, default=255.0, help="raw intensity mapped to 1.0")
    sp.add_argument("--mean", type=_floats, help="per-channel mean subtracted after scaling, e.g. 0.485,0.456,0.406")
    sp.add_argument("--std", type=_floats, help="per-channel std divided after mean subtraction")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("gen-weights", help="write seeded random weights (FDW1)")
    model_args(sp)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_weights)

    sp = sub.add_parser("export-arch", help="write the architecture as JSON")
    model_args(sp)
    sp.add_argument("--out", help="output path (default stdout)")
    sp.set_defaults(func=cmd_export_arch)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"fdnet {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
