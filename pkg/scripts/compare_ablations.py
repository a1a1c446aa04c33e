#!/usr/bin/env python3
"""Train every ablation preset on the same synthetic data and collect the
cycle-loss curves into one CSV for side-by-side comparison.

model1 is the full model; model2 disables the autoencoder subnet, the
content-space subnet, and parameter sharing (a plain cycle-consistent GAN);
model3/model4 drop one subnet each; model5 unties the reverse generator;
model6 doubles the weight on the denoising-direction terms.
"""

import argparse
import csv
import os

from ssrgan.model import ModelConfig, build_model
from ssrgan.trainer import (ABLATION_PRESETS, TrainConfig, ablation_presets,
                            train)
from ssrgan.synth import SynthConfig, make_datasets


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="experiments/ablations")
    ap.add_argument("--iterations", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--data-seed", type=int, default=100)
    ap.add_argument("--presets", nargs="+", default=sorted(ABLATION_PRESETS))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    ds = make_datasets(SynthConfig(seed=args.data_seed), 512, 512, 64)
    curves = {}
    for name in args.presets:
        cfg = ablation_presets(name, TrainConfig(iterations=args.iterations,
                                                 seed=args.seed))
        model = build_model(ModelConfig(dtype="float32", init_seed=args.seed,
                                        share_parameters=cfg.sharing_enabled))
        model.norm_scale = ds.scale
        _, history = train(model, ds.a.windows, ds.b.windows, cfg)
        curves[name] = [r.cycle for r in history.records]
        print(f"{name}: final cycle loss {curves[name][-1]:.4f}")

    path = os.path.join(args.out, "cycle_curves.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter"] + args.presets)
        for i in range(args.iterations):
            writer.writerow([i + 1] + [curves[n][i] for n in args.presets])
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
