"""Command-line interface: synthesize, train, denoise, evaluate, verify.

Every run takes an output directory, writes its effective configuration
there for reproducibility, and finishes with a short text summary. Settings
come from an optional JSON config file overridden by command-line flags;
unknown config keys are rejected.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys

import numpy as np

from .errors import ConfigError, FormatError, NumericsError
from .gradcheck import run_adjoint_suite, run_gradient_suite
from .losses import LossWeights
from .metrics import aas_baseline, compute_report
from .model import ModelConfig, build_model
from .pipeline import Recording, read_recording, write_recording
from .synth import SynthConfig, make_datasets
from .tensor import Tensor
from .trainer import (TrainConfig, ablation_presets, denoise_recording,
                      load_checkpoint, save_checkpoint, train)


def _field_names(cls) -> set:
    return {f.name for f in dataclasses.fields(cls)}


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return cfg


def _merge(cls, file_cfg: dict, cli_values: dict, allowed_extra: set = frozenset()):
    """Dataclass instance from config-file values overridden by CLI flags."""
    names = _field_names(cls)
    unknown = set(file_cfg) - names - allowed_extra
    if unknown:
        raise ConfigError(f"unknown config keys for {cls.__name__}: {sorted(unknown)}")
    merged = {k: v for k, v in file_cfg.items() if k in names}
    merged.update({k: v for k, v in cli_values.items() if k in names and v is not None})
    return cls(**merged)


def _prepare_outdir(out: str, effective: dict) -> str:
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.json"), "w") as fh:
        json.dump(effective, fh, indent=2, default=str)
    return out


def _summary(out: str, lines: list):
    text = "\n".join(str(l) for l in lines)
    with open(os.path.join(out, "summary.txt"), "w") as fh:
        fh.write(text + "\n")
    print(text)


def _add_dataclass_flags(parser, cls, skip=frozenset()):
    for f in dataclasses.fields(cls):
        if f.name in skip or not isinstance(f.type, str):
            continue
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            parser.add_argument(flag, default=None,
                                action=argparse.BooleanOptionalAction)
        elif f.type == "int":
            parser.add_argument(flag, type=int, default=None)
        elif f.type == "float":
            parser.add_argument(flag, type=float, default=None)
        elif f.type == "str":
            parser.add_argument(flag, type=str, default=None)


# ---- subcommands -----------------------------------------------------------


def cmd_synth(args) -> int:
    file_cfg = _load_config_file(args.config)
    cli = vars(args)
    synth_cfg = _merge(SynthConfig, file_cfg.get("synth", file_cfg), cli)
    n_a = args.n_train_a if args.n_train_a is not None else file_cfg.get("n_train_a", 512)
    n_b = args.n_train_b if args.n_train_b is not None else file_cfg.get("n_train_b", 512)
    n_eval = args.n_eval if args.n_eval is not None else file_cfg.get("n_eval", 64)
    out = _prepare_outdir(args.out, {
        "command": "synth", "synth": dataclasses.asdict(synth_cfg),
        "n_train_a": n_a, "n_train_b": n_b, "n_eval": n_eval})
    ds = make_datasets(synth_cfg, n_a, n_b, n_eval)
    for name, rec in ds.recordings.items():
        write_recording(rec, os.path.join(out, f"{name}.f32"))
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(ds.manifest, fh, indent=2, default=str)
    _summary(out, [
        f"wrote {len(ds.recordings)} recordings to {out}",
        f"A windows: {ds.a.windows.shape[0]}  B windows: {ds.b.windows.shape[0]}  "
        f"eval windows: {ds.eval_contaminated.windows.shape[0]}",
        f"normalization scale: {ds.scale:.6g}",
    ])
    return 0


def _load_dataset_dir(data_dir: str):
    manifest_path = os.path.join(data_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise ConfigError(f"{data_dir} has no manifest.json (expected `synth` output)")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    cfg = SynthConfig(**manifest["config"])
    n_a = None
    recs = {}
    for name in ("a_contaminated", "b_clean", "eval_contaminated",
                 "eval_clean", "eval_artifact"):
        recs[name] = read_recording(os.path.join(data_dir, f"{name}.f32"))
    return manifest, cfg, recs


def cmd_train(args) -> int:
    from .pipeline import segment

    file_cfg = _load_config_file(args.config)
    cli = vars(args)
    base = _merge(TrainConfig, file_cfg.get("train", file_cfg), cli,
                  allowed_extra=_field_names(LossWeights) | _field_names(ModelConfig))
    weight_src = file_cfg.get("weights", file_cfg.get("train", file_cfg))
    base.weights = _merge(LossWeights, {k: v for k, v in weight_src.items()
                                        if k in _field_names(LossWeights)}, cli)
    if args.preset:
        cfg = ablation_presets(args.preset, base)
    else:
        cfg = base
    model_src = file_cfg.get("model", file_cfg.get("train", file_cfg))
    model_cfg = _merge(ModelConfig, {k: v for k, v in model_src.items()
                                     if k in _field_names(ModelConfig)}, cli)
    model_cfg.share_parameters = cfg.sharing_enabled
    if cli.get("dtype") is None and "dtype" not in model_src:
        model_cfg.dtype = "float32"

    manifest, synth_cfg, recs = _load_dataset_dir(args.data)
    scale = manifest["scale"]
    ds_a = segment(recs["a_contaminated"], scale=scale)
    ds_b = segment(recs["b_clean"], scale=scale)

    out = _prepare_outdir(args.out, {
        "command": "train", "preset": args.preset, "data": args.data,
        "train": dataclasses.asdict(cfg), "model": dataclasses.asdict(model_cfg)})
    model = build_model(model_cfg)
    model.norm_scale = scale
    model, history = train(model, ds_a.windows, ds_b.windows, cfg)
    save_checkpoint(model, os.path.join(out, "checkpoint.ssrg"))
    history.to_csv(os.path.join(out, "history.csv"))
    final = history.records[-1] if history.records else None
    _summary(out, [
        f"trained {cfg.iterations} iterations "
        f"({history.g_update_count} G updates, {history.d_update_count} D updates)",
        f"final cycle loss: {final.cycle:.6g}" if final else "no iterations run",
        f"checkpoint: {os.path.join(out, 'checkpoint.ssrg')}",
    ])
    return 0


def cmd_denoise(args) -> int:
    model = load_checkpoint(args.checkpoint)
    rec = read_recording(args.input)
    out = _prepare_outdir(args.out, {
        "command": "denoise", "checkpoint": args.checkpoint, "input": args.input})
    denoised = denoise_recording(model, rec)
    ext = ".csv" if args.input.endswith(".csv") else ".f32"
    path = os.path.join(out, "denoised" + ext)
    write_recording(denoised, path)
    _summary(out, [f"denoised {args.input} -> {path}",
                   f"windows: {denoised.n_samples // model.config.window_len} per channel"])
    return 0


def cmd_eval(args) -> int:
    out_lines = []
    if args.before and args.after:
        before = read_recording(args.before)
        after = read_recording(args.after)
        clean = read_recording(args.clean) if args.clean else None
    elif args.checkpoint and args.data:
        _, _, recs = _load_dataset_dir(args.data)
        before = recs["eval_contaminated"]
        clean = recs["eval_clean"]
        if args.baseline == "aas":
            after = aas_baseline(before)
            out_lines.append("baseline: sliding-template subtraction")
        else:
            model = load_checkpoint(args.checkpoint)
            after = denoise_recording(model, before)
            n = after.n_samples
            before = Recording(before.samples[:, :n], before.sample_rate_hz)
            clean = Recording(clean.samples[:, :n], clean.sample_rate_hz)
    else:
        raise ConfigError("eval needs either --before/--after or --checkpoint/--data")
    out = _prepare_outdir(args.out, {
        "command": "eval", "before": args.before, "after": args.after,
        "checkpoint": args.checkpoint, "data": args.data, "baseline": args.baseline})
    report = compute_report(before, after, clean)
    with open(os.path.join(out, "report.json"), "w") as fh:
        fh.write(report.to_json())
    report.write_psd_csv(os.path.join(out, "psd_ch{channel}.csv"))
    out_lines += [f"INPS: {report.inps_db:.3f} dB", f"PTPR: {report.ptpr:.3f}"]
    if report.clean_correlation is not None:
        out_lines.append(f"clean correlation: {report.clean_correlation:.4f}")
    _summary(out, out_lines)
    return 0


def cmd_gradcheck(args) -> int:
    out = _prepare_outdir(args.out, {"command": "gradcheck", "seed": args.seed})
    results = run_gradient_suite(args.seed) + run_adjoint_suite(args.seed)
    lines = [f"{r.name:28s} err={r.error:.3e} tol={r.tolerance:.0e} "
             f"{'PASS' if r.passed else 'FAIL'}" for r in results]
    failed = [r for r in results if not r.passed]
    lines.append(f"{len(results) - len(failed)}/{len(results)} checks passed")
    _summary(out, lines)
    return 0 if not failed else 2


def cmd_features(args) -> int:
    model = load_checkpoint(args.checkpoint)
    rec = read_recording(args.input)
    from .pipeline import segment
    ds = segment(rec, window_seconds=model.config.window_len / rec.sample_rate_hz,
                 scale=model.norm_scale)
    out = _prepare_outdir(args.out, {
        "command": "features", "checkpoint": args.checkpoint,
        "input": args.input, "side": args.side})
    feats = model.middle_content(
        Tensor(ds.windows.astype(model.config.np_dtype())), args.side).data
    n, c, length = feats.shape
    path = os.path.join(out, "features.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window"] + [f"c{i}_t{t}" for i in range(c)
                                      for t in range(length)])
        for w in range(n):
            writer.writerow([w] + list(feats[w].reshape(-1)))
    _summary(out, [f"wrote {n} feature rows ({c}x{length} each) to {path}"])
    return 0


# ---- parser ----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ssrgan",
                     description="Unpaired artifact removal with a reversible GAN")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="JSON config file; flags override it")

    p = sub.add_parser("synth", help="generate synthetic datasets")
    common(p)
    p.add_argument("--n-train-a", type=int, default=None)
    p.add_argument("--n-train-b", type=int, default=None)
    p.add_argument("--n-eval", type=int, default=None)
    _add_dataclass_flags(p, SynthConfig)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model on a synth dataset directory")
    common(p)
    p.add_argument("--data", required=True, help="directory produced by `synth`")
    p.add_argument("--preset", choices=[f"model{i}" for i in range(1, 7)])
    _add_dataclass_flags(p, TrainConfig, skip={"weights", "mmd"})
    _add_dataclass_flags(p, LossWeights)
    _add_dataclass_flags(p, ModelConfig, skip={"share_parameters", "init_seed"})
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("denoise", help="denoise a recording with a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("eval", help="score before/after recordings or a checkpoint")
    common(p)
    p.add_argument("--before")
    p.add_argument("--after")
    p.add_argument("--clean")
    p.add_argument("--checkpoint")
    p.add_argument("--data")
    p.add_argument("--baseline", choices=["aas"])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="run gradient and adjoint verification")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("features", help="emit middle content layer feature maps")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--side", choices=["a", "b"], default="a")
    p.set_defaults(func=cmd_features)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ConfigError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
