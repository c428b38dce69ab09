"""Command-line entry point: ``pairhash {train,encode,eval,gradcheck,demo-synth}``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .core import LABEL_MODES
from .encoder import encode
from .errors import PairHashError
from .extractor import ExtractorSpec
from .io import Checkpoint, load_checkpoint, load_codes, load_dataset, save_checkpoint, save_codes, save_dataset
from .retrieval import evaluate
from .trainer import DEFAULT_ETA, TrainConfig, train

log = logging.getLogger("pairhash")

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
DEFAULT_LR = 1e-4


def configure_logging() -> None:
    level = LOG_LEVELS.get(os.environ.get("PAIRHASH_LOG", "info").lower(), logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)


def parse_extractor(text: str, input_dim: int) -> ExtractorSpec:
    """``identity``, ``linear:P`` or ``mlp:H1,...,P``."""
    kind, _, dims = text.partition(":")
    if kind == "identity":
        return ExtractorSpec.identity(input_dim)
    if kind not in ("linear", "mlp") or not dims:
        raise argparse.ArgumentTypeError(f"bad extractor {text!r}; use identity, linear:P or mlp:H,...,P")
    return ExtractorSpec(kind, (input_dim, *(int(x) for x in dims.split(","))))


def _add_dataset_args(p: argparse.ArgumentParser, flag: str = "--features") -> None:
    p.add_argument(flag, required=True, type=Path)
    p.add_argument("--format", choices=("auto", "csv", "binary"), default="auto")
    p.add_argument("--label-columns", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairhash", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="learn a hashing model from labeled features")
    _add_dataset_args(p)
    p.add_argument("--mode", choices=LABEL_MODES, default="single-label")
    p.add_argument("--code-length", type=int, default=12)
    p.add_argument("--eta", type=float, default=None, help="default: 10 single-label, 100 multi-label")
    p.add_argument("--lr", type=float, default=DEFAULT_LR)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--extractor", default="identity")
    p.add_argument("--freeze-backbone", action="store_true")
    p.add_argument("--out", required=True, type=Path, help="checkpoint path")
    p.add_argument("--out-codes", type=Path, help="also write training-set codes")
    p.add_argument("--loss-log", type=Path, help="per-iteration loss records (TSV)")

    p = sub.add_parser("encode", help="hash features with a trained checkpoint")
    p.add_argument("--checkpoint", required=True, type=Path)
    _add_dataset_args(p)
    p.add_argument("--out-codes", required=True, type=Path)

    p = sub.add_parser("eval", help="Hamming-ranking MAP of query codes against database codes")
    p.add_argument("--query-codes", required=True, type=Path)
    p.add_argument("--db-codes", required=True, type=Path)
    p.add_argument("--query-features", required=True, type=Path, help="source of query labels")
    p.add_argument("--db-features", required=True, type=Path, help="source of database labels")
    p.add_argument("--label-columns", type=int, default=1)
    p.add_argument("--top-r", type=int, default=None, help="default: whole database")
    p.add_argument("--mode", choices=LABEL_MODES, default="single-label")
    p.add_argument("--normalizer", choices=("retrieved", "total"), default="retrieved")
    p.add_argument("--json-out", type=Path)

    p = sub.add_parser("gradcheck", help="finite-difference check of all analytic gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--mlp-tolerance", type=float, default=1e-5, help="bound for MLP extractor parameters")
    p.add_argument("--instances", type=int, default=24)

    p = sub.add_parser("demo-synth", help="write the synthetic blob or circles datasets")
    p.add_argument("--kind", choices=("blobs", "circles"), default="blobs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--format", choices=("csv", "binary"), default="csv")
    return parser


def cmd_train(args) -> int:
    ds = load_dataset(args.features, args.format, args.label_columns)
    eta = DEFAULT_ETA[args.mode] if args.eta is None else args.eta
    log.info("eta = %g%s", eta, " (default for %s)" % args.mode if args.eta is None else "")
    spec = parse_extractor(args.extractor, ds.d)
    config = TrainConfig(
        code_length=args.code_length,
        eta=eta,
        learning_rate=args.lr,
        minibatch_size=args.batch,
        iterations=args.iters,
        seed=args.seed,
        freeze_backbone=args.freeze_backbone,
        label_mode=args.mode,
    )
    state = train(ds, spec, config)
    save_checkpoint(Checkpoint(spec, state.params, config), args.out)
    if args.out_codes:
        save_codes(state.codes, args.out_codes)
    if args.loss_log:
        with open(args.loss_log, "w") as f:
            f.write("iteration\tlikelihood_term\tquantization_term\ttotal\n")
            for k, rec in enumerate(state.loss_history):
                f.write(f"{k}\t{rec.likelihood_term!r}\t{rec.quantization_term!r}\t{rec.total!r}\n")
    if state.loss_history:
        last = state.loss_history[-1]
        log.info("final batch loss %.6g (likelihood %.6g, quantization %.6g)",
                 last.total, last.likelihood_term, last.quantization_term)
    print(f"wrote {args.out}")
    return 0


def cmd_encode(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.features, args.format, args.label_columns)
    codes = encode(ckpt.params, ckpt.spec, ds.features)
    save_codes(codes, args.out_codes)
    print(f"wrote {codes.n} codes of {codes.c} bits to {args.out_codes}")
    return 0


def cmd_eval(args) -> int:
    q = load_codes(args.query_codes)
    db = load_codes(args.db_codes)
    q_ds = load_dataset(args.query_features, label_columns=args.label_columns)
    db_ds = load_dataset(args.db_features, label_columns=args.label_columns)
    report = evaluate(q, q_ds.labels, db, db_ds.labels, args.mode, args.top_r, normalizer=args.normalizer)
    for line in report.lines():
        print(line)
    if args.json_out:
        args.json_out.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import run_suite

    results = run_suite(args.seed, args.instances, args.eps)
    head = max(r.head_error for r in results)
    theta = max((r.theta_error for r in results if r.kind != "mlp"), default=0.0)
    mlp = max((r.theta_error for r in results if r.kind == "mlp"), default=0.0)
    for r in results:
        log.debug("%s eta=%g shape=%s errors=%s", r.kind, r.eta, r.shape, r.errors)
    print(f"instances\t{len(results)}")
    print(f"max_relative_error_head\t{head:.3e}")
    print(f"max_relative_error_linear_extractor\t{theta:.3e}")
    print(f"max_relative_error_mlp_extractor\t{mlp:.3e}")
    ok = max(head, theta) < args.tolerance and mlp < args.mlp_tolerance
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_demo_synth(args) -> int:
    from .synth import make_blobs, make_circles

    maker = make_blobs if args.kind == "blobs" else make_circles
    train_ds, query_ds = maker(seed=args.seed)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    ext = "csv" if args.format == "csv" else "phft"
    for name, ds in (("train", train_ds), ("query", query_ds)):
        path = args.out_dir / f"{args.kind}_{name}.{ext}"
        save_dataset(ds, path, args.format)
        print(f"wrote {path} ({ds.n} x {ds.d})")
    return 0


COMMANDS = {
    "train": cmd_train,
    "encode": cmd_encode,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "demo-synth": cmd_demo_synth,
}


def cli_main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging()
    try:
        return COMMANDS[args.command](args)
    except argparse.ArgumentTypeError as e:
        parser.error(str(e))
    except (PairHashError, ValueError, OSError) as e:
        print(f"pairhash {args.command}: error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
