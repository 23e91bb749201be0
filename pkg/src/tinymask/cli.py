"""Command-line pipeline: augment -> train -> quantize -> eval -> bench.

Exit codes: 0 success, 1 internal or numeric error, 2 usage or data error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import datakit, engine, evalkit, modelio, quantizer, trainer
from .errors import (
    BudgetExceeded,
    CalibrationIncomplete,
    ConfigError,
    DataError,
    FormatError,
    NotFound,
    NumericError,
    ShapeMismatch,
)
from .netgraph import build_network, param_count, resolve_arch

log = logging.getLogger("tinymask")

USAGE_ERRORS = (DataError, ConfigError, NotFound, FormatError, ShapeMismatch, BudgetExceeded, CalibrationIncomplete)


class UsageError(Exception):
    pass


def _emit(text):
    sys.stdout.write(text)


def _load_arrays(root, size=(32, 32)):
    manifest = datakit.load_dataset(root)
    for path, why in manifest.skipped:
        log.warning("skipped %s: %s", path, why)
    return manifest, *datakit.to_arrays(manifest, size)


def cmd_synth(args):
    manifest = datakit.synth_dataset(args.n, args.seed)
    _write_manifest(manifest, Path(args.out))
    mask, no_mask = manifest.counts
    _emit(f"wrote {len(manifest)} images to {args.out} (mask {mask}, no_mask {no_mask})\n")


def _write_manifest(manifest, out):
    for d in datakit.CLASS_DIRS.values():
        (out / d).mkdir(parents=True, exist_ok=True)
    entries = []
    for i, e in enumerate(manifest.entries):
        stem = f"{i:06d}" if not e.source or e.source == "synth" else f"{i:06d}_{e.source}"
        path = out / datakit.CLASS_DIRS[e.label] / f"{stem}.png"
        datakit.write_image(path, e.load())
        entries.append(datakit.Entry(e.label, e.source, path))
    (out / "index.csv").write_text(datakit.DatasetManifest(entries).to_csv())


def cmd_augment(args):
    manifest = datakit.load_dataset(args.dataset)
    augmented = datakit.augment_manifest(manifest, n_standard=args.standard, seed=args.seed)
    _write_manifest(augmented, Path(args.out))
    (m_in, n_in), (m_out, n_out) = manifest.counts, augmented.counts
    if args.format == "csv":
        _emit(f"class,input,output\nmask,{m_in},{m_out}\nno_mask,{n_in},{n_out}\n")
    else:
        _emit(f"mask: {m_in} -> {m_out}\nno_mask: {n_in} -> {n_out}\ntotal: {len(manifest)} -> {len(augmented)}\n")


def cmd_train(args):
    manifest, x, y = _load_arrays(args.dataset)
    net_cfg = resolve_arch(args.arch, x.shape[1:])
    train_m, val_m = datakit.split(manifest, args.val_frac, args.seed)
    idx_tr = _positions(manifest, train_m)
    idx_va = _positions(manifest, val_m)
    cfg = trainer.TrainConfig(max_epochs=args.epochs, batch_size=args.batch, seed=args.seed, learning_rate=args.lr)
    params, history = trainer.train(cfg, net_cfg, (x[idx_tr], y[idx_tr]), (x[idx_va], y[idx_va]))
    out = Path(args.out)
    modelio.save(modelio.FloatModel(net_cfg, params), out)
    hist_path = Path(args.history) if args.history else out.with_suffix(".history.csv")
    hist_path.write_text(history.to_csv())
    best = history.best_epoch()
    _emit(
        f"params: {param_count(net_cfg)}\n"
        f"best_epoch: {best}\n"
        f"best_val_acc: {history.records[best - 1].val_acc:.4f}\n"
        f"final_val_acc: {history.records[-1].val_acc:.4f}\n"
        f"model: {out}\nhistory: {hist_path}\n"
    )


def _positions(manifest, subset):
    ids = {id(e): i for i, e in enumerate(manifest.entries)}
    return np.array([ids[id(e)] for e in subset.entries], dtype=np.int64)


def _load_float(path):
    model = modelio.load(path)
    if not isinstance(model, modelio.FloatModel):
        raise FormatError(f"{path}: expected a float32 container")
    return model


def cmd_quantize(args):
    if args.rep_samples < 1:
        raise UsageError("--rep-samples must be >= 1")
    fm = _load_float(args.model)
    source = args.test_set or args.dataset
    if source is None:
        raise UsageError("quantize needs --test-set (or --dataset) for the representative samples")
    _, x, _ = _load_arrays(source, fm.net_cfg.input_shape[:2])
    rng = np.random.default_rng(args.seed)
    pick = np.sort(rng.choice(len(x), size=min(args.rep_samples, len(x)), replace=False))
    net, _ = build_network(fm.net_cfg)
    stats = quantizer.calibrate(net, fm.params, x[pick])
    qm = quantizer.quantize_model(net, fm.params, stats)
    int8_bytes = modelio.save(qm, args.out)
    float_bytes = len(modelio.serialize(fm))
    sizes = modelio.size_report(float_bytes, int8_bytes)
    budget = modelio.budget_check(int8_bytes, int(args.budget_kb * 1024))
    if args.format == "csv":
        _emit(
            "float32_bytes,int8_bytes,reduction_pct,budget_bytes,budget_pass\n"
            f"{float_bytes},{int8_bytes},{sizes.reduction_pct:.4f},{budget.budget_bytes},{int(budget.passed)}\n"
        )
    else:
        _emit(f"representative_samples: {len(pick)}\n" + sizes.to_text() + budget.to_text() + f"model: {args.out}\n")
    if not budget.passed:
        log.warning("int8 model exceeds the %.0f KB device budget", args.budget_kb)


def _predict(model, x):
    if isinstance(model, modelio.FloatModel):
        net, _ = build_network(model.net_cfg)
        return trainer.predict_proba(net, model.params, x)
    return engine.predict(model, x)


def cmd_eval(args):
    models = [modelio.load(p) for p in args.model]
    if len(models) > 2:
        raise UsageError("eval takes at most two --model arguments")
    shape = models[0].net_cfg.input_shape
    for m in models:
        if m.net_cfg.input_shape != shape:
            raise FormatError("models disagree on input shape")
    _, x, y = _load_arrays(args.test_set, shape[:2])
    preds = {}
    out = []
    for path, m in zip(args.model, models):
        flavor = "int8" if isinstance(m, quantizer.QuantizedModel) else "float32"
        if flavor in preds:
            raise FormatError(f"two {flavor} models given; pass one float32 and one int8")
        pred = (_predict(m, x) >= 0.5).astype(np.int64)
        preds[flavor] = pred
        cm = evalkit.confusion(pred, y)
        rep = evalkit.report(cm)
        if args.format == "csv":
            out.append(f"# {flavor} {path}\n" + rep.to_csv())
        else:
            out.append(rep.to_text(f"{flavor} classification report ({path})") + cm.to_grid())
    if len(preds) == 2:
        cmp = evalkit.compare(preds["float32"], preds["int8"], y)
        out.append(cmp.to_csv() if args.format == "csv" else cmp.to_text())
    _emit("\n".join(out))


def cmd_bench(args):
    model = modelio.load(args.model)
    if not isinstance(model, quantizer.QuantizedModel):
        raise FormatError(f"{args.model}: bench runs the integer engine and needs an int8 container")
    rep = engine.bench(model, args.trials, args.clock_hz, args.macs_per_cycle, int(args.arena_kb * 1024), args.seed)
    _emit(rep.to_csv() if args.format == "csv" else rep.to_text())


def cmd_info(args):
    data = Path(args.model).read_bytes()
    header = modelio.read_header(data)
    model = modelio.deserialize(data)
    lines = [f"{k}: {v}" for k, v in header.items()]
    lines += [
        f"architecture: {model.net_cfg.name}",
        f"input_shape: {'x'.join(map(str, model.net_cfg.input_shape))}",
        f"layers: {len(model.net_cfg.layers)}",
        f"params: {param_count(model.net_cfg)}",
    ]
    _emit("\n".join(lines) + "\n")


def build_parser():
    p = argparse.ArgumentParser(prog="tinymask", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, fmt=True):
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        if fmt:
            sp.add_argument("--format", choices=("text", "csv"), default="text")
        return sp

    sp = common(sub.add_parser("synth", help="write a synthetic mask/no_mask dataset"), fmt=False)
    sp.add_argument("--n", type=int, default=2000)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = common(sub.add_parser("augment", help="standard + interpolation augmentation"))
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--standard", type=int, default=0, help="standard-augmented variants per image (default 0)")
    sp.set_defaults(func=cmd_augment)

    sp = common(sub.add_parser("train", help="train a float32 model"), fmt=False)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--arch", default="tinymask-ref")
    sp.add_argument("--epochs", type=int, default=50)
    sp.add_argument("--batch", type=int, default=32)
    sp.add_argument("--val-frac", type=float, default=0.1)
    sp.add_argument("--lr", type=float, default=0.001)
    sp.add_argument("--out", required=True)
    sp.add_argument("--history")
    sp.set_defaults(func=cmd_train)

    sp = common(sub.add_parser("quantize", help="full-integer quantization of a float32 model"))
    sp.add_argument("--model", required=True)
    sp.add_argument("--test-set")
    sp.add_argument("--dataset")
    sp.add_argument("--rep-samples", type=int, default=100)
    sp.add_argument("--budget-kb", type=float, default=230)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_quantize)

    sp = common(sub.add_parser("eval", help="classification report on the held-out test set"), seed=False)
    sp.add_argument("--model", action="append", required=True)
    sp.add_argument("--test-set", required=True)
    sp.set_defaults(func=cmd_eval)

    sp = common(sub.add_parser("bench", help="MACs, arena peak, latency and FPS estimate"))
    sp.add_argument("--model", required=True)
    sp.add_argument("--trials", type=int, default=10)
    sp.add_argument("--clock-hz", type=float, default=engine.DEFAULT_CLOCK_HZ)
    sp.add_argument("--macs-per-cycle", type=float, default=engine.DEFAULT_MACS_PER_CYCLE)
    sp.add_argument("--arena-kb", type=float, default=engine.FRAMEBUFFER_BYTES / 1024)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("info", help="dump a .tqm container header")
    sp.add_argument("--model", required=True)
    sp.set_defaults(func=cmd_info)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except USAGE_ERRORS as exc:
        print(f"tinymask {args.command}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"tinymask {args.command}: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"tinymask {args.command}: numeric error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
