"""Command-line interface.

Subcommands: generate-synthetic, score, fidelity, calibrate, mask, evaluate,
simulate, overlay. Every command writes into ``--out DIR`` and echoes its
resolved arguments to ``DIR/<command>.config.json``.

Dataset layout (as written by ``generate-synthetic``)::

    manifest.json
    X/0000.png  Y/0000.png          low-res input, ground truth
    pred/0000.png                   model prediction (draw 0)
    draws/0000/01.png ... MM.png    extra draws used for the score
    annotations/0000.png            optional semantic difference masks
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calibrate import (
    CalibrationMode,
    CalibrationPair,
    CalibrationRecord,
    RecordMismatchError,
    calibrate_bruteforce,
    calibrate_dp,
    empirical_risk,
    load_record,
    make_mask,
    save_record,
)
from .fidelity import FidelityMetricSpec, compute_fidelity, load_annotation
from .imagecore import ImageFormatError, load_floatmap, load_png, save_floatmap, save_png, srgb_to_lab_normalized
from .kernels import parse_kernel
from .metrics import evaluate_prediction, format_psnr, write_eval_csv
from .scoremap import ScoreConfig, score_from_draws
from .synthmodel import WorldConfig, gen_pair
from . import experiments as exp

MASK_POLARITY = {"confmask-mask-polarity": "255=trusted,0=untrusted"}
DATASET_FORMAT = "confmask-dataset"


class CommandError(Exception):
    """User-facing failure; printed without a traceback."""


# -- helpers ------------------------------------------------------------------


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CommandError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _echo_config(args, out: Path) -> None:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    cfg = json.loads(json.dumps(cfg, default=str))
    cfg["confmask_version"] = __version__
    path = out / f"{args.command}.config.json"
    path.write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _mode(text: str) -> CalibrationMode:
    return CalibrationMode.SUP_FAITHFUL if text == "sup" else CalibrationMode(text)


def _post_blur(text: str) -> float | None:
    if text.lower() == "none":
        return None
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("post blur must be positive or 'none'")
    return value


def _score_config(args) -> ScoreConfig:
    return ScoreConfig(num_draws=args.draws, kernel=parse_kernel(args.kernel), post_blur=args.post_blur)


def _metric(args) -> FidelityMetricSpec:
    kernel = parse_kernel(args.metric_kernel) if args.metric == "neighborhood" else None
    return FidelityMetricSpec(args.metric, kernel)


def _threshold_text(t: float) -> str:
    return "+inf" if t == math.inf else "-inf" if t == -math.inf else repr(t)


class Dataset:
    def __init__(self, root):
        self.root = Path(root)
        manifest = self.root / "manifest.json"
        if not manifest.is_file():
            raise CommandError(f"{self.root} is not a dataset (no manifest.json)")
        self.manifest = json.loads(manifest.read_text(encoding="utf-8"))
        if self.manifest.get("format") != DATASET_FORMAT:
            raise CommandError(f"{manifest}: unknown dataset format {self.manifest.get('format')!r}")
        self.names = [f"{i:04d}" for i in range(self.manifest["count"])]

    def _png(self, *parts) -> np.ndarray:
        path = self.root.joinpath(*parts)
        if not path.is_file():
            raise CommandError(f"missing input {path}")
        return load_png(path)

    def truth(self, name):
        return self._png("Y", f"{name}.png")

    def pred(self, name):
        return self._png("pred", f"{name}.png")

    def draws(self, name, count: int) -> list[np.ndarray]:
        return [self._png("draws", name, f"{i:02d}.png") for i in range(1, count + 1)]

    def annotation(self, name):
        path = self.root / "annotations" / f"{name}.png"
        if not path.is_file():
            raise CommandError(f"missing annotation {path} (semantic metric)")
        return load_annotation(path)


def _dataset_score(ds: Dataset, name: str, config: ScoreConfig) -> np.ndarray:
    return score_from_draws([srgb_to_lab_normalized(d) for d in ds.draws(name, config.num_draws)], config)


def _dataset_fidelity(ds: Dataset, name: str, metric: FidelityMetricSpec, pred_lab) -> np.ndarray:
    if metric.kind == "semantic":
        return compute_fidelity(metric, yhat_lab=pred_lab, annotation=ds.annotation(name))
    return compute_fidelity(metric, srgb_to_lab_normalized(ds.truth(name)), pred_lab)


def _overlay(pred_srgb: np.ndarray, trusted: np.ndarray) -> np.ndarray:
    """Tint untrusted pixels red at 50% opacity."""
    img = pred_srgb if pred_srgb.shape[2] == 3 else np.repeat(pred_srgb, 3, axis=2)
    out = img.copy()
    red = np.array([1.0, 0.0, 0.0])
    out[~trusted] = 0.5 * img[~trusted] + 0.5 * red
    return out


# -- commands -----------------------------------------------------------------


def cmd_generate_synthetic(args) -> int:
    out = _out_dir(args)
    world = WorldConfig(
        seed=args.seed, lr_width=args.lr_size[0], lr_height=args.lr_size[1], factor=args.factor
    )
    model = world.model()
    num_draws = 0 if args.no_draws else args.draws
    if args.count:
        for sub in ("X", "Y") + (("pred", "draws") if num_draws else ()):
            (out / sub).mkdir(exist_ok=True)
    for i in range(args.count):
        name = f"{i:04d}"
        x, y = gen_pair(world, args.start + i)
        save_png(x, out / "X" / f"{name}.png", bits=16)
        save_png(y, out / "Y" / f"{name}.png", bits=16)
        if not num_draws:
            continue
        draws = [y] * (num_draws + 1) if args.perfect_model else model.draws(x, range(num_draws + 1))
        save_png(draws[0], out / "pred" / f"{name}.png", bits=16)
        (out / "draws" / name).mkdir(exist_ok=True)
        for j in range(1, num_draws + 1):
            save_png(draws[j], out / "draws" / name / f"{j:02d}.png", bits=16)
    manifest = {
        "format": DATASET_FORMAT,
        "version": 1,
        "seed": args.seed,
        "start": args.start,
        "count": args.count,
        "num_draws": num_draws,
        "perfect_model": args.perfect_model,
        "world": world.to_dict(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _echo_config(args, out)
    print(f"wrote {args.count} pairs to {out}")
    return 0


def cmd_score(args) -> int:
    out = _out_dir(args)
    config = _score_config(args)
    if args.dataset:
        ds = Dataset(args.dataset)
        (out / "score").mkdir(exist_ok=True)
        for name in ds.names:
            save_floatmap(_dataset_score(ds, name, config), out / "score" / f"{name}.cfm")
        print(f"wrote {len(ds.names)} score maps to {out / 'score'}")
    else:
        if len(args.draw_files) != config.num_draws:
            raise CommandError(f"--draws {config.num_draws} but {len(args.draw_files)} draw files given")
        labs = [srgb_to_lab_normalized(load_png(p)) for p in args.draw_files]
        save_floatmap(score_from_draws(labs, config), out / "score.cfm")
        print(f"wrote {out / 'score.cfm'}")
    _echo_config(args, out)
    return 0


def cmd_fidelity(args) -> int:
    out = _out_dir(args)
    metric = _metric(args)
    if args.dataset:
        ds = Dataset(args.dataset)
        (out / "fidelity").mkdir(exist_ok=True)
        for name in ds.names:
            d = _dataset_fidelity(ds, name, metric, srgb_to_lab_normalized(ds.pred(name)))
            save_floatmap(d, out / "fidelity" / f"{name}.cfm")
        print(f"wrote {len(ds.names)} fidelity maps to {out / 'fidelity'}")
    else:
        if args.pred is None:
            raise CommandError("--pred is required without --dataset")
        pred_lab = srgb_to_lab_normalized(load_png(args.pred))
        if metric.kind == "semantic":
            if args.annotation is None:
                raise CommandError("semantic metric needs --annotation")
            d = compute_fidelity(metric, yhat_lab=pred_lab, annotation=load_annotation(args.annotation))
        else:
            if args.truth is None:
                raise CommandError("--truth is required for the pointwise/neighborhood metrics")
            d = compute_fidelity(metric, srgb_to_lab_normalized(load_png(args.truth)), pred_lab)
        save_floatmap(d, out / "fidelity.cfm")
        print(f"wrote {out / 'fidelity.cfm'}")
    _echo_config(args, out)
    return 0


def cmd_calibrate(args) -> int:
    out = _out_dir(args)
    ds = Dataset(args.dataset)
    config = _score_config(args)
    metric = _metric(args)
    mode = _mode(args.mode)
    available = ds.manifest.get("num_draws", 0)
    if available < config.num_draws:
        raise CommandError(f"dataset has {available} draws per image; --draws {config.num_draws} requested")

    pairs = []
    for name in ds.names:
        pred_lab = srgb_to_lab_normalized(ds.pred(name))
        pairs.append(CalibrationPair(_dataset_score(ds, name, config),
                                     _dataset_fidelity(ds, name, metric, pred_lab)))
    if not pairs:
        raise CommandError("dataset has no pairs")

    kwargs = {"allow_large_alpha": args.allow_large_alpha}
    if args.bruteforce:
        t = calibrate_bruteforce(pairs, args.alpha, mode, **kwargs)
    else:
        t = calibrate_dp(pairs, args.alpha, mode, **kwargs)
    if args.verify:
        other = calibrate_dp(pairs, args.alpha, mode, **kwargs) if args.bruteforce \
            else calibrate_bruteforce(pairs, args.alpha, mode, **kwargs)
        if other != t:
            print(f"verification FAILED: dp/bruteforce thresholds differ "
                  f"({_threshold_text(t)} vs {_threshold_text(other)})", file=sys.stderr)
            return 1
        print("verification: dp and bruteforce thresholds agree")

    record = CalibrationRecord(alpha=args.alpha, threshold=t, n=len(pairs), mode=mode,
                               metric=metric, score_config=config)
    save_record(record, out / "record.json")
    _echo_config(args, out)
    print(f"t_alpha = {_threshold_text(t)}")
    print(f"n = {len(pairs)}")
    print(f"empirical risk at t_alpha = {empirical_risk(pairs, t)!r}")
    return 0


def _load_record(args) -> CalibrationRecord:
    """Load ``--record`` and refuse it if explicitly offered conventions disagree."""
    try:
        record = load_record(args.record)
    except (OSError, ValueError) as exc:
        raise CommandError(f"cannot load record {args.record}: {exc}") from exc
    score_config = metric = None
    if any(getattr(args, k, None) is not None for k in ("draws", "kernel", "post_blur")):
        rec = record.score_config
        score_config = ScoreConfig(
            num_draws=rec.num_draws if args.draws is None else args.draws,
            kernel=rec.kernel if args.kernel is None else parse_kernel(args.kernel),
            post_blur=rec.post_blur if args.post_blur is None else _post_blur(args.post_blur),
        )
    if getattr(args, "metric", None) is not None:
        kernel = args.metric_kernel or "gaussian:1"
        metric = FidelityMetricSpec(args.metric, parse_kernel(kernel) if args.metric == "neighborhood" else None)
    record.check_compatible(metric=metric, score_config=score_config)
    return record


def cmd_mask(args) -> int:
    out = _out_dir(args)
    record = _load_record(args)
    if args.dataset:
        ds = Dataset(args.dataset)
        (out / "masks").mkdir(exist_ok=True)
        (out / "overlays").mkdir(exist_ok=True)
        for name in ds.names:
            trusted = make_mask(_dataset_score(ds, name, record.score_config), record.threshold)
            save_png(trusted.astype(np.float64), out / "masks" / f"{name}.png", text=MASK_POLARITY)
            save_png(_overlay(ds.pred(name), trusted), out / "overlays" / f"{name}.png")
        print(f"wrote {len(ds.names)} masks to {out / 'masks'}")
    else:
        if args.score:
            score = load_floatmap(args.score).astype(np.float64)
            if score.shape[2] != 1:
                raise CommandError("score map must be single-channel")
            score = score[:, :, 0]
        elif args.draw_files:
            config = record.score_config
            if len(args.draw_files) != config.num_draws:
                raise CommandError(
                    f"record was calibrated with {config.num_draws} draws; got {len(args.draw_files)}"
                )
            score = score_from_draws([srgb_to_lab_normalized(load_png(p)) for p in args.draw_files], config)
        else:
            raise CommandError("give --score, --draw-files or --dataset")
        trusted = make_mask(score, record.threshold)
        save_png(trusted.astype(np.float64), out / "mask.png", text=MASK_POLARITY)
        if args.pred:
            pred = load_png(args.pred)
            if pred.shape[:2] != trusted.shape:
                raise CommandError(f"prediction {pred.shape[:2]} and score {trusted.shape} differ in size")
            save_png(_overlay(pred, trusted), out / "overlay.png")
        print(f"trusted fraction {trusted.mean():.4f}, mask size (mistrust) {1 - trusted.mean():.4f}")
    _echo_config(args, out)
    return 0


def cmd_evaluate(args) -> int:
    out = _out_dir(args)
    record = _load_record(args)
    ds = Dataset(args.dataset)
    rows, errors = [], []
    for name in ds.names:
        pred_lab = srgb_to_lab_normalized(ds.pred(name))
        truth_path = ds.root / "Y" / f"{name}.png"
        if not truth_path.is_file():
            raise CommandError(f"missing ground truth {truth_path}")
        y_lab = srgb_to_lab_normalized(load_png(truth_path))
        d = _dataset_fidelity(ds, name, record.metric, pred_lab)
        trusted = make_mask(_dataset_score(ds, name, record.score_config), record.threshold)
        rep = evaluate_prediction(y_lab, pred_lab, d, trusted)
        errors.append(rep.fidelity_error)
        rows.append({
            "image_id": name, "alpha": record.alpha, "mode": record.mode.value,
            "fidelity_error": repr(rep.fidelity_error), "masked_psnr": rep.masked_psnr,
            "trusted_fraction": repr(rep.trusted_fraction),
            "mistrust_fraction": repr(rep.mistrust_fraction),
        })
    if not rows:
        raise CommandError("dataset has no pairs")
    fe = np.array(errors)
    se = float(fe.std(ddof=1) / math.sqrt(fe.size)) if fe.size > 1 else 0.0
    psnrs = [r["masked_psnr"] for r in rows if r["masked_psnr"] is not None]
    finite = [p for p in psnrs if math.isfinite(p)]
    agg_psnr = None if not psnrs else (math.inf if len(finite) < len(psnrs) else float(np.mean(finite)))
    mistrust = float(np.mean([float(r["mistrust_fraction"]) for r in rows]))
    rows.append({
        "image_id": "mean", "alpha": record.alpha, "mode": record.mode.value,
        "fidelity_error": repr(float(fe.mean())), "masked_psnr": agg_psnr,
        "trusted_fraction": repr(1.0 - mistrust), "mistrust_fraction": repr(mistrust),
    })
    write_eval_csv(out / "eval.csv", rows)
    _echo_config(args, out)
    print(f"mean fidelity error {fe.mean():.6f} +- {se:.6f} (SE) over {fe.size} images, alpha {record.alpha}")
    print(f"mean masked PSNR {format_psnr(agg_psnr)} dB, mean mask size (mistrust) {mistrust:.4f}")
    return 0


def cmd_overlay(args) -> int:
    out = _out_dir(args)
    mask = load_png(args.mask)[:, :, 0] > 0.5
    image = load_png(args.image)
    if image.shape[:2] != mask.shape:
        raise CommandError(f"mask {mask.shape} and image {image.shape[:2]} differ in size")
    save_png(_overlay(image, mask), out / "overlay.png")
    _echo_config(args, out)
    print(f"wrote {out / 'overlay.png'}")
    return 0


def _world(args) -> WorldConfig:
    return WorldConfig(seed=args.seed, lr_width=args.lr_size[0], lr_height=args.lr_size[1], factor=args.factor)


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    kind = args.experiment
    if kind == "counterexample":
        agg, rows = exp.run_prior_counterexample(
            tau=args.tau, epsilon=args.epsilon, alpha=args.alpha, delta=args.delta, n=args.n,
            trials=args.trials, seed=args.seed,
        )
        ours, _ = exp.run_conformal_scalar(tau=args.tau, alpha=args.alpha, n=args.n,
                                           trials=args.trials, seed=args.seed)
        results = [agg, ours]
        exp.write_trials_csv(out / "trials.csv", rows)
        print(f"prior method violation frequency {agg.mean:.4f} +- {agg.se:.4f} vs delta {agg.bound:.4f}: "
              f"{'violation demonstrated' if agg.passed else 'no violation shown'}")
        print(f"conformal mask on the same world: mean fidelity error {ours.mean:.4f} "
              f"(bound {ours.bound}) -> {ours.verdict}")
    else:
        world = _world(args)
        common = {"mode": _mode(args.mode), "score_config": _score_config(args),
                  "metric": _metric(args), "workers": args.workers}
        if kind == "guarantee":
            agg, rows = exp.run_guarantee(world, args.n, args.alpha, args.trials, **common)
            results = [agg]
        elif kind == "psnr-bound":
            agg, rows = exp.run_psnr_bound(world, args.n, args.alpha, args.trials, **common)
            results = [agg]
        elif kind == "leakage":
            print(f"bound = {exp.leakage_bound(args.alpha, args.n_new, args.n_leaked):.6g}")
            agg, rows = exp.run_leakage(world, args.n_new, args.n_leaked, args.alpha, args.trials, **common)
            results = [agg]
        elif kind == "alpha-sweep":
            alphas = [float(a) for a in args.alphas.split(",")]
            results, collected = exp.run_alpha_sweep(world, args.n, alphas, args.trials, **common)
            rows = [r for a in alphas for r in collected[a]]
        else:  # argparse restricts choices; kept for direct callers
            raise CommandError(f"unknown experiment {kind!r}")
        exp.write_trials_csv(out / "trials.csv", rows)
        for r in results:
            alpha = r.params.get("alpha")
            print(f"{r.name} alpha={alpha}: mean {r.mean:.6g} +- {r.se:.3g} (SE), bound {r.bound:.6g} -> {r.verdict}")
    exp.write_summary(out / "summary.json", results, {"experiment": kind})
    _echo_config(args, out)
    return exp.exit_code(results)


# -- parser -------------------------------------------------------------------


def _add_score_flags(p) -> None:
    p.add_argument("--draws", type=int, default=8, help="number of model draws M (default 8)")
    p.add_argument("--kernel", default="box:2", help="score smoothing kernel, box:R or gaussian:S")
    p.add_argument("--post-blur", type=_post_blur, default=2.0, help="gaussian sigma or 'none'")


def _add_metric_flags(p) -> None:
    p.add_argument("--metric", choices=("pointwise", "neighborhood", "semantic"), default="pointwise")
    p.add_argument("--metric-kernel", default="gaussian:1", help="kernel for the neighborhood metric")


def _add_check_flags(p) -> None:
    """Optional conventions; when given they must match the calibration record."""
    g = p.add_argument_group("record checks (default: take everything from the record)")
    g.add_argument("--draws", type=int, default=None)
    g.add_argument("--kernel", default=None)
    g.add_argument("--post-blur", default=None, help="gaussian sigma or 'none'")
    g.add_argument("--metric", choices=("pointwise", "neighborhood", "semantic"), default=None)
    g.add_argument("--metric-kernel", default=None)


def _add_world_flags(p) -> None:
    p.add_argument("--lr-size", type=int, nargs=2, metavar=("W", "H"), default=(8, 8))
    p.add_argument("--factor", type=int, choices=(2, 4), default=4)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="confmask", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"confmask {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-synthetic", help="write a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--start", type=int, default=0, help="first pair index in the world's stream")
    p.add_argument("--seed", type=int, default=0)
    _add_world_flags(p)
    p.add_argument("--draws", type=int, default=8, help="draws per image besides the prediction")
    p.add_argument("--no-draws", action="store_true", help="write X/Y pairs only")
    p.add_argument("--perfect-model", action="store_true", help="prediction and draws equal Y")
    p.set_defaults(func=cmd_generate_synthetic)

    p = sub.add_parser("score", help="compute score maps from model draws")
    p.add_argument("--out", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--dataset")
    src.add_argument("--draw-files", nargs="+")
    _add_score_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("fidelity", help="compute fidelity maps D")
    p.add_argument("--out", required=True)
    p.add_argument("--dataset")
    p.add_argument("--truth")
    p.add_argument("--pred")
    p.add_argument("--annotation")
    _add_metric_flags(p)
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("calibrate", help="calibrate the threshold t_alpha on a dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--mode", choices=("conservative", "sup"), default="conservative")
    p.add_argument("--bruteforce", action="store_true", help="use the quadratic reference search")
    p.add_argument("--verify", action="store_true", help="also run the other algorithm and compare")
    p.add_argument("--allow-large-alpha", action="store_true", help="accept alpha up to 3")
    _add_score_flags(p)
    _add_metric_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("mask", help="apply a calibration record to new images")
    p.add_argument("--out", required=True)
    p.add_argument("--record", required=True)
    p.add_argument("--dataset")
    p.add_argument("--score")
    p.add_argument("--draw-files", nargs="+")
    p.add_argument("--pred", help="prediction to render the overlay on")
    _add_check_flags(p)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("evaluate", help="per-image fidelity error, masked PSNR and mask size")
    p.add_argument("--out", required=True)
    p.add_argument("--record", required=True)
    p.add_argument("--dataset", required=True)
    _add_check_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("overlay", help="tint the untrusted region of an image red")
    p.add_argument("--out", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--image", required=True)
    p.set_defaults(func=cmd_overlay)

    p = sub.add_parser("simulate", help="Monte Carlo checks of the guarantees")
    p.add_argument("experiment", choices=("guarantee", "psnr-bound", "leakage", "alpha-sweep", "counterexample"))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--alphas", default="0.05,0.1,0.15,0.2,0.3,0.4,0.5")
    p.add_argument("--n", type=int, default=None, help="calibration set size (default 50, 20 for counterexample)")
    p.add_argument("--n-new", type=int, default=9)
    p.add_argument("--n-leaked", type=int, default=10)
    p.add_argument("--trials", type=int, default=None, help="default 500 (2000 for counterexample)")
    p.add_argument("--mode", choices=("conservative", "sup"), default="conservative")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--delta", type=float, default=None, help="default tau / 2")
    _add_world_flags(p)
    _add_score_flags(p)
    _add_metric_flags(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate":
        if args.trials is None:
            args.trials = 2000 if args.experiment == "counterexample" else 500
        if args.n is None:
            args.n = 20 if args.experiment == "counterexample" else 50
    try:
        return args.func(args)
    except (CommandError, RecordMismatchError, ImageFormatError, exp.DegenerateWorldError) as exc:
        print(f"confmask {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, argparse.ArgumentTypeError) as exc:
        print(f"confmask {args.command}: invalid input: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
