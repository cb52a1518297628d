"""Command-line front-end tying the modules together.

Exit codes: 0 success, 2 flag errors, 3 output I/O failures, 4 input parse
failures.  A JSON document passed via --config supplies flag defaults, with
explicit flags overriding.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import bench, boxio, gridio, metrics, reports, sgd
from .geometry import BevGrid
from .losses import LossKind, NoiseModel, closed_form_variance, sigma_c
from .metrics import DEFAULT_BINS, FrameSet

EXIT_OK = 0
EXIT_FLAGS = 2
EXIT_OUTPUT_IO = 3
EXIT_INPUT_PARSE = 4


class InputParseError(Exception):
    pass


class OutputIOError(Exception):
    pass


def _write(fn, *args, **kwargs):
    """Run an output-writing call, converting OSError so it maps to the
    output-I/O exit code rather than the input-parse one."""
    try:
        return fn(*args, **kwargs)
    except OSError as exc:
        raise OutputIOError(str(exc)) from exc


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip() != ""]


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip() != ""]


def _loss_from_args(args) -> LossKind:
    name = args.loss.lower().replace("-", "_")
    if name == "l1":
        return LossKind.l1()
    if name == "l2":
        return LossKind.l2()
    if name in ("smoothl1", "smooth_l1"):
        return LossKind.smooth_l1(args.beta)
    if name == "dice":
        if args.length is None:
            raise argparse.ArgumentTypeError("--length required for dice loss")
        return LossKind.dice(args.length)
    raise argparse.ArgumentTypeError(f"unknown loss {args.loss!r}")


def _run_config(args) -> dict:
    cfg = {}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "config", "out"):
            continue
        if isinstance(value, (str, int, float, bool)) or value is None:
            cfg[key] = value
        elif isinstance(value, (list, tuple)):
            cfg[key] = list(value)
    return cfg


def cmd_variance(args) -> int:
    loss = _loss_from_args(args)
    closed = closed_form_variance(loss, NoiseModel(args.sigma))
    var, se = sgd.empirical_gradient_variance(loss, args.sigma, args.seed, args.samples)
    print(f"loss={loss.label()} sigma={reports.fmt(args.sigma)}")
    print(f"closed_form={reports.fmt(closed)}")
    print(f"empirical={reports.fmt(var)} std_error={reports.fmt(se)}")
    if args.out:
        _write(
            reports.write_csv,
            args.out,
            ["loss", "sigma", "var_closed", "var_empirical", "std_error"],
            [[loss.label(), args.sigma, closed, var, se]],
            _run_config(args),
            args.deterministic,
        )
    return EXIT_OK


def cmd_threshold(args) -> int:
    result = sigma_c(args.length)
    print(f"length={reports.fmt(result.length)}")
    print(f"sigma_m={reports.fmt(result.sigma_m)}")
    print(f"sigma_l1={reports.fmt(result.sigma_l1)}")
    print(f"sigma_c={reports.fmt(result.sigma_c)}")
    print(f"residual={reports.fmt(result.solver_residual)} iterations={result.iterations}")
    return EXIT_OK


def _sgd_template(args) -> sgd.SgdConfig:
    return sgd.SgdConfig(
        dim=args.dim,
        sigma=0.0,
        loss=LossKind.l1(),
        steps=args.steps,
        trials=args.trials,
        mode=args.mode,
        base_seed=args.seed,
    )


def cmd_sweep(args) -> int:
    template = _sgd_template(args)
    rows = sgd.sweep(args.lengths, args.sigmas, args.losses, template)
    header = ["loss", "length", "sigma", "var_closed", "var_empirical", "mean_dev", "std_err"]
    table = [[r.loss, r.length, r.sigma, r.var_closed, r.var_empirical, r.mean_dev, r.std_err] for r in rows]
    if args.out:
        _write(reports.write_csv, args.out, header, table, _run_config(args), args.deterministic)
        if args.format == "csv+svg":
            series: dict[str, list[tuple[float, float]]] = {}
            for r in rows:
                key = r.loss if r.loss != "dice" else f"dice(l={r.length:g})"
                y = r.var_closed if r.var_closed is not None else r.var_empirical
                series.setdefault(key, []).append((r.sigma, y))
            svg_path = str(args.out).rsplit(".", 1)[0] + ".svg"
            _write(reports.svg_line_plot, svg_path, series, "noise sigma (m)", "gradient variance", log_y=args.log_y)
    else:
        print(",".join(header))
        for row in table:
            print(",".join(reports.fmt(v) for v in row))
    return EXIT_OK


def cmd_sgd(args) -> int:
    loss = _loss_from_args(args)
    cfg = sgd.SgdConfig(
        dim=args.dim,
        sigma=args.sigma,
        loss=loss,
        steps=args.steps,
        trials=args.trials,
        mode=args.mode,
        base_seed=args.seed,
    )
    stats = sgd.run_ensemble(cfg)
    print(f"loss={loss.label()} sigma={reports.fmt(args.sigma)} mode={args.mode}")
    print(f"mean_deviation_sq={reports.fmt(stats.mean_deviation_sq)} std_error={reports.fmt(stats.std_error)}")
    print(f"empirical_grad_variance={reports.fmt(stats.empirical_grad_variance)}")
    if args.out:
        _write(
            reports.write_csv,
            args.out,
            ["loss", "sigma", "mode", "mean_dev", "std_err", "var_empirical"],
            [[loss.label(), args.sigma, args.mode, stats.mean_deviation_sq, stats.std_error,
              stats.empirical_grad_variance]],
            _run_config(args),
            args.deterministic,
        )
    return EXIT_OK


def cmd_theorem1(args) -> int:
    template = sgd.SgdConfig(
        dim=args.dim,
        sigma=args.sigma,
        loss=LossKind.l1(),
        steps=args.steps,
        trials=1,
        mode="idealized",
        base_seed=args.seed,
    )
    report = bench.theorem1_experiment(
        args.length, args.sigma, template, args.seeds, objects_per_category=args.objects
    )
    comments = []
    for ell in args.length:
        flag = "met" if report.precondition_met[ell] else "NOT met"
        comments.append(
            f"length {ell:g}: sigma_c={report.sigma_c[ell]:.6g}, precondition sigma >= sigma_c {flag}"
        )
        if not report.precondition_met[ell]:
            print(f"warning: precondition sigma >= sigma_c not met for length {ell:g}", file=sys.stderr)
    header = ["loss", "length", "sigma", "seed", "ap50", "ap25", "mean_abs_err"]
    table = [[r.loss, r.length, r.sigma, r.seed, r.ap50, r.ap25, r.mean_abs_err] for r in report.rows]
    if args.out:
        _write(reports.write_csv, args.out, header, table, _run_config(args), args.deterministic, comments)
    for ell in args.length:
        print(f"length={ell:g} sigma={reports.fmt(args.sigma)} sigma_c={reports.fmt(report.sigma_c[ell])}")
        for loss in ("l1", "l2", "dice"):
            print(
                f"  {loss}: mean_ap50={reports.fmt(report.mean_ap50[(loss, ell)])} "
                f"mean_ap25={reports.fmt(report.mean_ap25[(loss, ell)])}"
            )
        print(
            f"  dice win rate vs l1={reports.fmt(report.win_rate_vs_l1[ell])} "
            f"vs l2={reports.fmt(report.win_rate_vs_l2[ell])}"
        )
    return EXIT_OK


def _frames_from_files(pred_path, gt_path) -> list[FrameSet]:
    preds = boxio.group_by_frame(boxio.read_box_lines(pred_path))
    gts = boxio.group_by_frame(boxio.read_box_lines(gt_path))
    for frame, boxes in preds.items():
        for box in boxes:
            if box.score is None:
                raise InputParseError(f"{pred_path}: frame {frame!r} has an unscored prediction")
    frames = []
    for frame_id in sorted(set(preds) | set(gts)):
        frames.append(FrameSet(frame_id, preds.get(frame_id, []), gts.get(frame_id, [])))
    return frames


def _parse_bins(text: str):
    edges = _float_list(text)
    if sorted(edges) != edges or len(edges) < 1:
        raise argparse.ArgumentTypeError("bin edges must be increasing")
    bins = [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]
    bins.append((edges[-1], math.inf))
    return tuple(bins)


def cmd_eval(args) -> int:
    frames = _frames_from_files(args.pred, args.gt)
    groups = None
    if args.groups:
        groups = {}
        import csv as _csv

        with open(args.groups, newline="") as fh:
            for line_no, row in enumerate(_csv.reader(fh), start=1):
                if not row or row[0].startswith("#"):
                    continue
                if len(row) != 2:
                    raise InputParseError(f"{args.groups}:{line_no}: expected category,group")
                groups[row[0].strip()] = row[1].strip()
    report = metrics.evaluate(frames, thresholds=args.iou, bins=args.bins, groups=groups)
    header = ["category", "threshold", "bin", "ap", "n_gt", "n_pred"]
    table = []
    for cat in report.categories:
        for thr in report.thresholds:
            for lab in report.bin_labels:
                curve = report.curves[(cat, thr, lab)]
                table.append([cat, thr, lab, curve.ap, curve.n_gt, curve.n_pred])
    comments = [f"mAP@{thr:g} = {report.map_per_threshold[thr]:.9g}" for thr in report.thresholds]
    comments += [f"AP[{g}]@{thr:g} = {ap:.9g}" for (g, thr), ap in sorted(report.group_ap.items())]
    if args.out:
        _write(reports.write_csv, args.out, header, table, _run_config(args), args.deterministic, comments)
    print(f"{'category':<16}{'thr':>6}{'bin':>10}{'ap':>12}{'n_gt':>7}{'n_pred':>8}")
    for cat, thr, lab, ap, n_gt, n_pred in table:
        print(f"{cat:<16}{thr:>6g}{lab:>10}{ap:>12.4f}{n_gt:>7}{n_pred:>8}")
    for line in comments:
        print(line)
    return EXIT_OK


def cmd_nms(args) -> int:
    records = boxio.read_box_lines(args.input)
    for frame, box in records:
        if box.score is None:
            raise InputParseError(f"{args.input}: frame {frame!r} has an unscored box; NMS requires scores")
    out_records = []
    for frame_id, boxes in boxio.group_by_frame(records).items():
        for box in metrics.center_nms(boxes, args.radius):
            out_records.append((frame_id, box))
    _write(boxio.write_box_lines, out_records, args.out)
    print(f"kept {len(out_records)} of {len(records)} boxes")
    return EXIT_OK


def cmd_rasterize(args) -> int:
    records = boxio.read_box_lines(args.input)
    boxes = [box for _, box in records]
    extent = tuple(args.extent)
    if len(extent) != 4:
        raise argparse.ArgumentTypeError("--extent needs x_min,x_max,z_min,z_max")
    from .geometry import rasterize

    grid = rasterize(boxes, BevGrid(args.rows, args.cols, extent))
    _write(gridio.write_grid, grid, args.out)
    print(f"rasterized {len(boxes)} boxes onto {args.rows}x{args.cols} grid -> {args.out}")
    return EXIT_OK


def cmd_seg_iou(args) -> int:
    import csv as _csv

    pairs: dict[str, list] = {}
    with open(args.pairs, newline="") as fh:
        for line_no, row in enumerate(_csv.reader(fh), start=1):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != 3:
                raise InputParseError(f"{args.pairs}:{line_no}: expected category,pred_path,gt_path")
            cat, pred_path, gt_path = (v.strip() for v in row)
            try:
                pred = gridio.read_grid(pred_path)
                gt = gridio.read_grid(gt_path)
            except (OSError, ValueError) as exc:
                raise InputParseError(f"{args.pairs}:{line_no}: {exc}") from exc
            pairs.setdefault(cat, []).append((pred, gt))
    report = metrics.seg_miou(pairs, binarize_threshold=args.threshold)
    table = [[cat, iou] for cat, iou in sorted(report.per_category.items())]
    if args.out:
        _write(
            reports.write_csv,
            args.out,
            ["category", "iou"],
            table,
            _run_config(args),
            args.deterministic,
            [f"mean_foreground = {report.mean_foreground:.9g}"],
        )
    for cat, iou in table:
        print(f"{cat:<16}{iou:.6f}")
    print(f"mean_foreground={reports.fmt(report.mean_foreground)}")
    return EXIT_OK


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="bevlab", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)
    registry: dict[str, argparse.ArgumentParser] = {}

    def sub(name, func, **kwargs):
        p = subs.add_parser(name, **kwargs)
        p.set_defaults(func=func)
        p.add_argument("--config", help="JSON file supplying flag defaults")
        p.add_argument("--seed", type=int, default=0, help="base seed for all stochastic work")
        p.add_argument("--deterministic", action="store_true", help="suppress timestamps in output headers")
        p.add_argument("--out", default=None, help="output file path")
        registry[name] = p
        return p

    p = sub("variance", cmd_variance, help="closed-form and Monte Carlo gradient variance")
    p.add_argument("--loss", required=True)
    p.add_argument("--length", type=float, default=None)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--samples", type=int, default=1_000_000)

    p = sub("threshold", cmd_threshold, help="critical noise threshold for an object length")
    p.add_argument("--length", type=float, required=True)

    p = sub("sweep", cmd_sweep, help="loss/length/sigma convergence sweep")
    p.add_argument("--lengths", type=_float_list, required=True)
    p.add_argument("--sigmas", type=_float_list, required=True)
    p.add_argument("--losses", type=_str_list, required=True)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--mode", choices=["idealized", "literal"], default="idealized")
    p.add_argument("--format", choices=["csv", "csv+svg"], default="csv")
    p.add_argument("--log-y", action="store_true")

    p = sub("sgd", cmd_sgd, help="single Monte Carlo SGD ensemble")
    p.add_argument("--loss", required=True)
    p.add_argument("--length", type=float, default=None)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--mode", choices=["idealized", "literal"], default="idealized")

    p = sub("theorem1", cmd_theorem1, help="dice-vs-regression AP experiment")
    p.add_argument("--length", type=_float_list, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--objects", type=int, default=10_000)
    p.add_argument("--steps", type=int, default=5000)
    p.add_argument("--dim", type=int, default=16)

    p = sub("eval", cmd_eval, help="AP3D evaluation of prediction/GT box files")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--iou", type=_float_list, default=[0.5, 0.25])
    p.add_argument("--bins", type=_parse_bins, default=DEFAULT_BINS)
    p.add_argument("--groups", default=None, help="CSV mapping category,group")

    p = sub("nms", cmd_nms, help="center-based 3D NMS on a box file")
    p.add_argument("--input", required=True)
    p.add_argument("--radius", type=float, default=4.0)

    p = sub("rasterize", cmd_rasterize, help="rasterize boxes onto a BEV grid")
    p.add_argument("--input", required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--extent", type=_float_list, required=True)

    p = sub("seg-iou", cmd_seg_iou, help="dataset-level segmentation IoU from grid pairs")
    p.add_argument("--pairs", required=True, help="CSV manifest: category,pred_path,gt_path")
    p.add_argument("--threshold", type=float, default=0.5)

    return parser, registry


def main(argv=None) -> int:
    parser, registry = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                defaults = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read --config: {exc}", file=sys.stderr)
            return EXIT_INPUT_PARSE
        sub_parser = registry[args.command]
        known = {a.dest for a in sub_parser._actions}
        bad = set(defaults) - known
        if bad:
            print(f"error: unknown config keys: {sorted(bad)}", file=sys.stderr)
            return EXIT_FLAGS
        sub_parser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    # commands that require --out
    if args.command in ("nms", "rasterize") and not args.out:
        parser.error(f"{args.command} requires --out")
    try:
        return args.func(args)
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    except boxio.BoxFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_PARSE
    except InputParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_PARSE
    except OutputIOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT_IO
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT_IO


if __name__ == "__main__":
    sys.exit(main())
