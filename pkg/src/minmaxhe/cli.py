"""Command-line entry point: ``minmaxhe <command> ...``."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import approx, circuit, data, fold, model_io, train
from .errors import MinMaxHEError


def _write_text(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as f:
            f.write(text)


def _load_config(spec: str) -> dict:
    if os.path.exists(spec):
        return model_io.load_config(spec)
    return model_io.reference_config(spec)


def _limit(x, y, n):
    return (x[:n], y[:n]) if n else (x, y)


def cmd_train(args):
    cfg = _load_config(args.config)
    act = approx.ActivationKind(args.activation, args.alpha) if args.activation else None
    net = model_io.build_network(cfg, args.seed, minmax=not args.no_minmax,
                                 activation=act, minmax_range=args.minmax_range)
    x, y = _limit(*data.load_mnist(args.mnist_dir, "train"), args.limit)
    tr_idx, val_idx = data.train_val_split(x.shape[0], args.val_fraction, args.seed)
    onehot = data.one_hot(y, net.num_classes)
    val = (x[val_idx], y[val_idx]) if val_idx.size else None
    tcfg = train.TrainConfig(batch_size=args.batch, epochs=args.epochs, seed=args.seed)
    net, _ = train.fit(net, (x[tr_idx], onehot[tr_idx]), tcfg, val=val, log=sys.stdout)
    model_io.save_model(net, args.out)


def cmd_fit_poly(args):
    kind = approx.ActivationKind(args.fn, args.alpha)
    series = approx.fit_chebyshev(kind, args.degree, tuple(args.range), args.samples)
    _write_text(json.dumps(series.to_dict()) + "\n", args.out)


def cmd_swap(args):
    net = model_io.load_model(args.model)
    with open(args.plan) as f:
        plan = fold.plan_from_json(net, json.load(f))
    model_io.save_model(fold.swap_activations(net, plan), args.out)


def cmd_fold(args):
    model_io.save_model(fold.fold_minmax(model_io.load_model(args.model)), args.out)


def cmd_divfree(args):
    model_io.save_model(fold.divfree_rewrite(model_io.load_model(args.model)), args.out)


def cmd_eval(args):
    net = model_io.load_model(args.model)
    x, y = _limit(*data.load_mnist(args.mnist_dir, args.split), args.limit)
    print(f"accuracy,{train.evaluate_accuracy(net, (x, y))!r}")


def cmd_profile(args):
    with open(args.series) as f:
        series = approx.ChebyshevSeries.from_dict(json.load(f))
    lo, hi, count = args.grid
    prof = approx.error_profile(series, approx.ActivationKind(args.fn, args.alpha),
                                (float(lo), float(hi), int(count)))
    if args.out in (None, "-"):
        approx.write_profile_csv(prof, sys.stdout)
    else:
        with open(args.out, "w", newline="") as f:
            approx.write_profile_csv(prof, f)


def cmd_report_depth(args):
    rep = circuit.depth_report(model_io.load_model(args.model), args.fixed_point_k)
    _write_text(rep.to_json(indent=2) + "\n", args.out)


def cmd_export(args):
    model_io.export_npz(model_io.load_model(args.model), args.out)


def cmd_import(args):
    model_io.save_model(model_io.import_npz(args.input), args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="minmaxhe", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("train", help="build a network from a config and train it on MNIST")
    s.add_argument("--config", required=True, help="config JSON path or a bundled name")
    s.add_argument("--mnist-dir", required=True)
    s.add_argument("--epochs", type=int, default=5)
    s.add_argument("--batch", type=int, default=64)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--no-minmax", action="store_true", help="drop Min-Max layers (baseline 1)")
    s.add_argument("--activation", choices=["relu", "elu"])
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--minmax-range", type=float, nargs=2, metavar=("LO", "HI"))
    s.add_argument("--val-fraction", type=float, default=0.1)
    s.add_argument("--limit", type=int, default=0, help="use only the first N training samples")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("fit-poly", help="fit a Chebyshev approximation")
    s.add_argument("--fn", choices=["relu", "elu"], required=True)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--degree", type=int, required=True)
    s.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"), default=[-1.0, 1.0])
    s.add_argument("--samples", type=int, default=approx.DEFAULT_SAMPLES)
    s.add_argument("--out")
    s.set_defaults(func=cmd_fit_poly)

    s = sub.add_parser("swap", help="replace activations by polynomials from a plan file")
    s.add_argument("--model", required=True)
    s.add_argument("--plan", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_swap)

    for name, func, text in (("fold", cmd_fold, "fold Min-Max layers into preceding weights"),
                             ("divfree", cmd_divfree, "rewrite average pooling as sum pooling")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--model", required=True)
        s.add_argument("--out", required=True)
        s.set_defaults(func=func)

    s = sub.add_parser("eval", help="print accuracy on an MNIST split")
    s.add_argument("--model", required=True)
    s.add_argument("--mnist-dir", required=True)
    s.add_argument("--split", choices=["train", "test"], default="test")
    s.add_argument("--limit", type=int, default=0)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("profile", help="absolute-error CSV of a series against its function")
    s.add_argument("--series", required=True)
    s.add_argument("--fn", choices=["relu", "elu"], required=True)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--grid", nargs=3, required=True, metavar=("LO", "HI", "COUNT"))
    s.add_argument("--out")
    s.set_defaults(func=cmd_profile)

    s = sub.add_parser("report-depth", help="multiplicative-depth report as JSON")
    s.add_argument("--model", required=True)
    s.add_argument("--fixed-point-k", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_report_depth)

    s = sub.add_parser("export", help="write a model as a binary .npz")
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_export)

    s = sub.add_parser("import", help="convert an exported .npz back to a JSON model")
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_import)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (MinMaxHEError, OSError, ValueError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"minmaxhe {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
