"""Command-line front end for the full workflow.

Subcommands: synth, augment, train, eval, sweep, ablate. Artifacts land
under name-keyed subdirectories of --out (no timestamps), so reruns with
the same config and seeds overwrite deterministically. Every subcommand
echoes its effective config into its artifact directory.

Exit codes: 0 success, 2 bad config (offending key named), 3 missing
inputs, 1 anything else. Errors print one line to stderr in the form
"error: <category>: <detail>".
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .augment import AugmentParams, build_dataset, load_dataset, save_dataset
from .config import ConfigError, DEFAULTS, echo_config, load_config
from .detect import anomaly_map, anomaly_score, export_heatmap, roc_points
from .model import (
    Cae,
    CaeConfig,
    CheckpointError,
    build_cae,
    load_checkpoint,
)
from .rng import mix
from .synth import (
    FaultSpec,
    HeatSource,
    SceneConfig,
    generate_split,
    load_frames,
    save_frames,
)
from .tensor import Tensor
from .trainer import TrainConfig, train
from . import augment as augment_mod


class MissingInputError(Exception):
    pass


_RUN_README = """\
Artifact layout (fixed column orders):
  synth/<split>/frame_*.pgm        16-bit PGM, maxval 16383 (14-bit counts)
  synth/<split>/manifest.jsonl     file, t_s, current_a, label, heater_current_a, viewpoint
  dataset/*.pgm                    16-bit PGM, maxval 65535, values in [0,1]
  dataset/manifest.jsonl           file, index, kind, source, split, sampled augmentation
  train/checkpoint.cae             binary checkpoint (magic CAE1, CRC-32)
  train/loss.csv                   epoch,train_loss,val_loss,seconds
  eval/scores.csv                  set,file,label,score
  eval/roc_<set>.csv               threshold,fpr,tpr
  eval/auc.json                    {set name: AUC}
  eval/heatmaps/                   8-bit PGM/PPM visualizations
  sweep/sweep.csv                  num_layers,latent_dim,final_val_loss,auc
  ablate/ablate.csv                kind,value,auc
Each subcommand writes its effective config to <dir>/config.json.
"""


def _write_run_readme(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "README.txt").write_text(_RUN_README, encoding="utf-8")


def _scene_from(config: dict) -> SceneConfig:
    s = config["scene"]
    return SceneConfig(
        ambient_c=float(s["ambient_c"]),
        tau_s=float(s["tau_s"]),
        noise_counts=float(s["noise_counts"]),
    )


def _augment_params_from(config: dict) -> AugmentParams:
    a = config["augment"]
    params = AugmentParams(
        pad_factor=float(a["pad_factor"]),
        rotation_deg=tuple(a["rotation_deg"]),
        perspective_scale=tuple(a["perspective_scale"]),
        crop_fraction=tuple(a["crop_fraction"]),
        brightness_delta=tuple(a["brightness_delta"]),
        contrast_delta=tuple(a["contrast_delta"]),
        out_size=int(a["out_size"]),
    )
    for stage in a["disabled_stages"]:
        try:
            params = params.disable(stage)
        except ValueError:
            raise ConfigError(
                "augment.disabled_stages", f"unknown augmentation stage '{stage}'"
            )
    return params


def _model_config_from(config: dict) -> CaeConfig:
    m = config["model"]
    try:
        return CaeConfig(
            num_layers=int(m["num_layers"]),
            latent_dim=int(m["latent_dim"]),
            input_size=int(m["input_size"]),
        )
    except ValueError as e:
        raise ConfigError("model", str(e))


def _train_config_from(config: dict) -> TrainConfig:
    t = config["train"]
    try:
        return TrainConfig(
            batch_size=int(t["batch_size"]),
            epochs=int(t["epochs"]),
            learning_rate=float(t["learning_rate"]),
            adam_beta1=float(t["adam_beta1"]),
            adam_beta2=float(t["adam_beta2"]),
            adam_eps=float(t["adam_eps"]),
            shuffle_seed=int(config["seeds"]["shuffle"]),
        )
    except ValueError as e:
        raise ConfigError("train", str(e))


def _fault_tag(current_a: float) -> str:
    return f"test_fault_{int(round(current_a * 1000))}mA"


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(config: dict, out: Path) -> int:
    scene = _scene_from(config)
    seed = int(config["seeds"]["scene"])
    synth_dir = out / "synth"
    print(f"synth: generating train split (600 frames) -> {synth_dir / 'train'}")
    save_frames(generate_split(scene, "train", seed=mix(seed, 1)), synth_dir / "train")
    print("synth: generating normal test split (180 frames)")
    save_frames(generate_split(scene, "test", seed=mix(seed, 2)), synth_dir / "test_normal")
    for current in config["eval"]["heater_currents_a"]:
        fault = FaultSpec(heater_current_a=float(current))
        tag = _fault_tag(float(current))
        print(f"synth: generating faulty test split at {current} A -> {tag}")
        # same seed as the normal test split: paired viewpoints and loads,
        # so score differences isolate the fault signature
        save_frames(
            generate_split(scene, "test", fault=fault, seed=mix(seed, 2)),
            synth_dir / tag,
            heater_current_a=float(current),
        )
    echo_config(config, synth_dir)
    return 0


def cmd_augment(config: dict, out: Path) -> int:
    train_dir = out / "synth" / "train"
    if not (train_dir / "manifest.jsonl").exists():
        raise MissingInputError(f"no synthesized train frames at {train_dir}; run synth first")
    frames = load_frames(train_dir)
    originals = [f.to_unit() for f in frames]
    params = _augment_params_from(config)
    n_total = int(config["augment"]["n_total"])
    seed = int(config["seeds"]["augment"])
    print(f"augment: building {n_total} images from {len(originals)} originals")
    ds = build_dataset(originals, n_total, params, seed)
    save_dataset(ds, out / "dataset")
    echo_config(config, out / "dataset")
    print(f"augment: wrote {len(ds.train)} train / {len(ds.val)} val images")
    return 0


def cmd_train(config: dict, out: Path) -> int:
    dataset_dir = out / "dataset"
    if not (dataset_dir / "manifest.jsonl").exists():
        raise MissingInputError(f"no dataset at {dataset_dir}; run augment first")
    ds = load_dataset(dataset_dir)
    model_cfg = _model_config_from(config)
    train_cfg = _train_config_from(config)
    cae = build_cae(model_cfg, seed=int(config["seeds"]["init"]))
    print(
        f"train: {model_cfg.num_layers} layers, latent {model_cfg.latent_dim}, "
        f"{len(ds.train)} train / {len(ds.val)} val, {train_cfg.epochs} epochs"
    )
    train(
        cae,
        ds,
        train_cfg,
        out_dir=out / "train",
        progress=lambda s: print(
            f"  epoch {s.epoch:3d}  train {s.train_loss:.5f}  val {s.val_loss:.5f}  {s.seconds:.1f}s"
        ),
    )
    echo_config(config, out / "train")
    return 0


def _score_images(cae: Cae, images: np.ndarray, eval_cfg: dict, batch: int = 32):
    """Forward images (n,S,S) through the model; scores and reconstructions."""
    scores = []
    recons = np.empty_like(images)
    for lo in range(0, len(images), batch):
        x = images[lo : lo + batch][:, None, :, :]
        x_hat = cae(Tensor(x)).data[:, 0]
        recons[lo : lo + batch] = x_hat
        for i in range(x_hat.shape[0]):
            amap = anomaly_map(x[i, 0], x_hat[i])
            scores.append(
                anomaly_score(amap, eval_cfg["score_method"], int(eval_cfg["smooth_k"]))
            )
    return scores, recons


def _resize_frames(frames, out_size: int) -> np.ndarray:
    params = AugmentParams(out_size=out_size)
    return np.stack([augment_mod.resize_plain(f.to_unit(), params) for f in frames])


def cmd_eval(config: dict, out: Path) -> int:
    ckpt = out / "train" / "checkpoint.cae"
    if not ckpt.exists():
        raise MissingInputError(f"no checkpoint at {ckpt}; run train first")
    cae = load_checkpoint(ckpt)
    synth_dir = out / "synth"
    normal_dir = synth_dir / "test_normal"
    if not (normal_dir / "manifest.jsonl").exists():
        raise MissingInputError(f"no test frames at {normal_dir}; run synth first")
    fault_dirs = sorted(d for d in synth_dir.glob("test_fault_*") if d.is_dir())
    if not fault_dirs:
        raise MissingInputError(f"no faulty test splits under {synth_dir}; run synth first")

    eval_cfg = config["eval"]
    size = cae.config.input_size
    eval_dir = out / "eval"
    eval_dir.mkdir(parents=True, exist_ok=True)
    heat_dir = eval_dir / "heatmaps"
    heat_dir.mkdir(exist_ok=True)

    normal_frames = load_frames(normal_dir)
    normal_images = _resize_frames(normal_frames, size)
    normal_scores, normal_recons = _score_images(cae, normal_images, eval_cfg)
    _export_example(heat_dir, "normal", normal_images[0], normal_recons[0])

    rows = [("test_normal", f"frame_{i:05d}.pgm", 0, s) for i, s in enumerate(normal_scores)]
    aucs = {}
    for fdir in fault_dirs:
        frames = load_frames(fdir)
        images = _resize_frames(frames, size)
        scores, recons = _score_images(cae, images, eval_cfg)
        _export_example(heat_dir, fdir.name, images[0], recons[0])
        rows += [(fdir.name, f"frame_{i:05d}.pgm", 1, s) for i, s in enumerate(scores)]
        curve = roc_points(normal_scores + scores, [0] * len(normal_scores) + [1] * len(scores))
        curve.to_csv(eval_dir / f"roc_{fdir.name}.csv")
        aucs[fdir.name] = curve.auc
        print(f"eval: {fdir.name}  AUC = {curve.auc:.4f}")

    with open(eval_dir / "scores.csv", "w", encoding="utf-8") as f:
        f.write("set,file,label,score\n")
        for set_name, fname, label, score in rows:
            f.write(f"{set_name},{fname},{label},{score!r}\n")
    with open(eval_dir / "auc.json", "w", encoding="utf-8") as f:
        json.dump(aucs, f, indent=2, sort_keys=True)
        f.write("\n")
    echo_config(config, eval_dir)
    return 0


def _export_example(heat_dir: Path, tag: str, image: np.ndarray, recon: np.ndarray) -> None:
    export_heatmap(image, heat_dir / f"{tag}_input.ppm", "iron")
    export_heatmap(recon, heat_dir / f"{tag}_recon.ppm", "iron")
    export_heatmap(anomaly_map(image, recon), heat_dir / f"{tag}_residual.pgm", "gray")


def _eval_auc_for(cae: Cae, out: Path, eval_cfg: dict) -> float:
    """AUC over the normal test split plus every faulty split (pooled)."""
    synth_dir = out / "synth"
    normal_frames = load_frames(synth_dir / "test_normal")
    size = cae.config.input_size
    scores, labels = [], []
    ns, _ = _score_images(cae, _resize_frames(normal_frames, size), eval_cfg)
    scores += ns
    labels += [0] * len(ns)
    for fdir in sorted(d for d in synth_dir.glob("test_fault_*") if d.is_dir()):
        fs, _ = _score_images(cae, _resize_frames(load_frames(fdir), size), eval_cfg)
        scores += fs
        labels += [1] * len(fs)
    return roc_points(scores, labels).auc


def cmd_sweep(config: dict, out: Path, layers_list, latent_list) -> int:
    dataset_dir = out / "dataset"
    if not (dataset_dir / "manifest.jsonl").exists():
        raise MissingInputError(f"no dataset at {dataset_dir}; run augment first")
    if not (out / "synth" / "test_normal" / "manifest.jsonl").exists():
        raise MissingInputError("no test frames; run synth first")
    ds = load_dataset(dataset_dir)
    train_cfg = _train_config_from(config)
    sweep_dir = out / "sweep"
    sweep_dir.mkdir(parents=True, exist_ok=True)
    results = []
    for layers in layers_list:
        for latent in latent_list:
            cell = dict(config, model=dict(config["model"], num_layers=layers, latent_dim=latent))
            model_cfg = _model_config_from(cell)
            cae = build_cae(model_cfg, seed=int(config["seeds"]["init"]))
            print(f"sweep: training num_layers={layers} latent_dim={latent}")
            stats = train(cae, ds, train_cfg, out_dir=sweep_dir / f"layers{layers}_latent{latent}")
            auc = _eval_auc_for(cae, out, config["eval"])
            results.append((layers, latent, stats[-1].val_loss, auc))
            print(f"sweep: layers={layers} latent={latent} val={stats[-1].val_loss:.5f} auc={auc:.4f}")
    with open(sweep_dir / "sweep.csv", "w", encoding="utf-8") as f:
        f.write("num_layers,latent_dim,final_val_loss,auc\n")
        for layers, latent, val, auc in results:
            f.write(f"{layers},{latent},{val:.9f},{auc:.9f}\n")
    echo_config(config, sweep_dir)
    return 0


def cmd_ablate(config: dict, out: Path, counts) -> int:
    train_dir = out / "synth" / "train"
    if not (train_dir / "manifest.jsonl").exists():
        raise MissingInputError(f"no synthesized train frames at {train_dir}; run synth first")
    if not (out / "synth" / "test_normal" / "manifest.jsonl").exists():
        raise MissingInputError("no test frames; run synth first")
    originals = [f.to_unit() for f in load_frames(train_dir)]
    base_params = _augment_params_from(config)
    seed = int(config["seeds"]["augment"])
    model_cfg = _model_config_from(config)
    train_cfg = _train_config_from(config)
    ablate_dir = out / "ablate"
    ablate_dir.mkdir(parents=True, exist_ok=True)

    def run_case(params: AugmentParams, n_total: int):
        ds = build_dataset(originals, n_total, params, seed)
        cae = build_cae(model_cfg, seed=int(config["seeds"]["init"]))
        train(cae, ds, train_cfg)
        return _eval_auc_for(cae, out, config["eval"])

    results = []
    for n in counts:
        print(f"ablate: augmentation count {n}")
        auc = run_case(base_params, int(n))
        results.append(("count", str(n), auc))
        print(f"ablate: count={n} auc={auc:.4f}")
    default_count = int(config["augment"]["n_total"])
    for stage in augment_mod.STAGES:
        print(f"ablate: disabling stage '{stage}' at count {default_count}")
        auc = run_case(base_params.disable(stage), default_count)
        results.append(("stage", stage, auc))
        print(f"ablate: stage={stage} auc={auc:.4f}")
    with open(ablate_dir / "ablate.csv", "w", encoding="utf-8") as f:
        f.write("kind,value,auc\n")
        for kind, value, auc in results:
            f.write(f"{kind},{value},{auc:.9f}\n")
    echo_config(config, ablate_dir)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _parse_int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _parse_float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermocae",
        description="Thermal-image fault detection: synthesize, augment, train, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--out", type=Path, default=Path("runs"), help="artifact directory")
        p.add_argument("--seed", type=int, help="master seed overriding the seeds section")

    p = sub.add_parser("synth", help="generate synthetic train/test thermal frames")
    common(p)
    p.add_argument("--heater-current", type=_parse_float_list, help="fault currents in A, comma-separated")

    p = sub.add_parser("augment", help="build the augmented training dataset")
    common(p)
    p.add_argument("--n-aug", type=int, help="total dataset size including originals")
    p.add_argument("--disable", action="append", default=[], metavar="STAGE",
                   help=f"disable an augmentation stage ({', '.join(augment_mod.STAGES)})")

    p = sub.add_parser("train", help="train the autoencoder")
    common(p)
    p.add_argument("--layers", type=int, help="number of convolutional layers")
    p.add_argument("--latent", type=int, help="latent dimension")
    p.add_argument("--epochs", type=int, help="training epochs")

    p = sub.add_parser("eval", help="score test frames, write ROC/AUC artifacts")
    common(p)

    p = sub.add_parser("sweep", help="grid over layer count and latent dimension")
    common(p)
    p.add_argument("--layers", type=_parse_int_list, default=[2, 3, 4, 5, 6])
    p.add_argument("--latent", type=_parse_int_list, default=[8, 16, 32, 64, 128])
    p.add_argument("--epochs", type=int, help="training epochs")

    p = sub.add_parser("ablate", help="augmentation count and stage ablations")
    common(p)
    p.add_argument("--n-aug", type=_parse_int_list, default=[600, 1000, 2000, 5000, 10000],
                   help="augmentation counts to evaluate")
    p.add_argument("--epochs", type=int, help="training epochs")

    return parser


def _config_from_args(args) -> dict:
    overrides: dict = {}
    if args.seed is not None:
        overrides["seeds"] = {
            "scene": mix(args.seed, 1),
            "augment": mix(args.seed, 2),
            "init": mix(args.seed, 3),
            "shuffle": mix(args.seed, 4),
        }
    if getattr(args, "heater_current", None):
        overrides.setdefault("eval", {})["heater_currents_a"] = args.heater_current
    if getattr(args, "n_aug", None) and isinstance(args.n_aug, int):
        overrides.setdefault("augment", {})["n_total"] = args.n_aug
    if getattr(args, "disable", None):
        overrides.setdefault("augment", {})["disabled_stages"] = args.disable
    if getattr(args, "layers", None) and isinstance(args.layers, int):
        overrides.setdefault("model", {})["num_layers"] = args.layers
    if getattr(args, "latent", None) and isinstance(args.latent, int):
        overrides.setdefault("model", {})["latent_dim"] = args.latent
    if getattr(args, "epochs", None):
        overrides.setdefault("train", {})["epochs"] = args.epochs
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        out = Path(args.out)
        _write_run_readme(out)
        if args.command == "synth":
            return cmd_synth(config, out)
        if args.command == "augment":
            return cmd_augment(config, out)
        if args.command == "train":
            return cmd_train(config, out)
        if args.command == "eval":
            return cmd_eval(config, out)
        if args.command == "sweep":
            return cmd_sweep(config, out, args.layers, args.latent)
        if args.command == "ablate":
            return cmd_ablate(config, out, args.n_aug)
        raise ValueError(f"unknown command {args.command}")
    except ConfigError as e:
        print(f"error: config: {e} (key: {e.key})", file=sys.stderr)
        return 2
    except (MissingInputError, FileNotFoundError) as e:
        print(f"error: missing-input: {e}", file=sys.stderr)
        return 3
    except CheckpointError as e:
        print(f"error: checkpoint: {e}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as e:
        print(f"error: runtime: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
