"""Experiment runner: prepare data, train both models, evaluate, tabulate.

Usage::

    auxabsa prepare --config run.json
    auxabsa train-detector --config run.json
    auxabsa train-sentiment --config run.json [--mode right]
    auxabsa eval --config run.json [--mode predicted --mode none]
    auxabsa report --out runs/fixture

Every artifact embeds the config hash, the seed and the package version.
Exit codes: 0 success, 2 configuration / input error, 3 runtime abort.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import torch

from . import __version__
from .corpus import (
    AspectInventory,
    CorpusError,
    SplitBundle,
    aspect_inventory,
    filter_single_target,
    load_dataset,
    read_jsonl,
    split,
    with_polarity,
    write_jsonl,
)
from .detector import AspectDetector
from .encoder import EncoderSpec, EncodingError
from .pipeline import EVAL_MODES, PipelineConfig, PipelineError, cross_domain_eval
from .sentiment import SentimentPredictor
from .synthetic import fixture_path
from .trainer import Hyperparameters, SentimentFraming, TrainingAborted, evaluate, train

log = logging.getLogger("auxabsa")

EXIT_CONFIG = 2
EXIT_RUNTIME = 3
ROLES = ("detector", "sentiment")
SPLITS = ("train", "dev", "test")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path
    seed: int
    out: Path
    encoder: EncoderSpec
    datasets: dict
    detector_hp: Hyperparameters
    sentiment_hp: Hyperparameters
    modes: list[str]
    fallback: str = "none_mode"
    null_target: str = "it"
    config_hash: str = ""

    @classmethod
    def from_file(cls, path, seed: int | None = None, out: str | None = None) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
        return cls.from_dict(raw, path.parent, seed, out)

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".", seed: int | None = None, out: str | None = None) -> "RunConfig":
        raw = json.loads(json.dumps(raw))
        if seed is not None:
            raw["seed"] = seed
        if out is not None:
            raw["out"] = str(out)
        base_dir = Path(base_dir)
        unknown = set(raw) - {"seed", "out", "encoder", "datasets", "detector", "sentiment", "modes",
                              "fallback", "null_target", "description"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        seed = int(raw.get("seed", 0))
        try:
            encoder = EncoderSpec(**raw.get("encoder", {}))
            det = Hyperparameters.detector(**{"max_length": encoder.max_length, **raw.get("detector", {}), "seed": seed})
            sen = Hyperparameters.sentiment(**{"max_length": encoder.max_length, **raw.get("sentiment", {}), "seed": seed})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad config section: {exc}") from exc
        modes = raw.get("modes", list(EVAL_MODES))
        bad = [m for m in modes if m not in EVAL_MODES]
        if bad:
            raise ConfigError(f"unknown modes {bad}; expected a subset of {EVAL_MODES}")
        datasets = raw.get("datasets", {})
        for role in ROLES:
            if role not in datasets:
                raise ConfigError(f"datasets.{role} is required")
        for role, ds in datasets.items():
            if role not in ROLES + ("eval",):
                raise ConfigError(f"unknown dataset role {role!r}")
            if "path" not in ds or "format" not in ds:
                raise ConfigError(f"datasets.{role} needs 'path' and 'format'")
        canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
        out_dir = Path(raw.get("out", "runs/default"))
        return cls(
            raw=raw,
            base_dir=base_dir,
            seed=seed,
            out=out_dir if out_dir.is_absolute() else base_dir / out_dir,
            encoder=encoder,
            datasets=datasets,
            detector_hp=det,
            sentiment_hp=sen,
            modes=list(modes),
            fallback=raw.get("fallback", "none_mode"),
            null_target=raw.get("null_target", "it"),
            config_hash=hashlib.sha256(canonical.encode()).hexdigest()[:16],
        )

    def dataset_path(self, role: str) -> Path:
        p = self.datasets[role]["path"]
        if p.startswith("fixture:"):
            return Path(str(fixture_path(p.split(":", 1)[1])))
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def provenance(self) -> dict:
        return {"config_hash": self.config_hash, "seed": self.seed, "code_version": __version__}

    def data_dir(self, role: str) -> Path:
        return self.out / "data" / role

    def checkpoint_dir(self, name: str) -> Path:
        return self.out / "checkpoints" / name


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_bundle(cfg: RunConfig, role: str) -> tuple[SplitBundle, AspectInventory]:
    d = cfg.data_dir(role)
    manifest_path = d / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"prepared data missing: expected {manifest_path} (run 'prepare' first)")
    manifest = json.loads(manifest_path.read_text())
    parts = {s: read_jsonl(d / f"{s}.jsonl") for s in SPLITS}
    return SplitBundle(seed=manifest["seed"], **parts), AspectInventory(manifest["inventory"])


def cmd_prepare(cfg: RunConfig) -> None:
    for role in cfg.datasets:
        path = cfg.dataset_path(role)
        if not path.exists():
            raise ConfigError(f"dataset file for {role!r} not found: {path}")
        records = filter_single_target(load_dataset(path, cfg.datasets[role]["format"]))
        if role == "sentiment":
            records = with_polarity(records)
        bundle = split(records, cfg.seed)
        d = cfg.data_dir(role)
        for s in SPLITS:
            write_jsonl(getattr(bundle, s), d / f"{s}.jsonl")
        inventory = aspect_inventory(records)
        _write_json(d / "manifest.json", {**bundle.manifest(), **cfg.provenance(),
                                          "inventory": list(inventory.names), "source": str(path)})
        log.info("prepared %s: %s records, sizes %s", role, len(records), bundle.sizes())


def _seeded(seed: int):
    torch.manual_seed(seed)


def cmd_train(cfg: RunConfig, which: str, modes: list[str] | None = None) -> list[Path]:
    bundle, inventory = load_bundle(cfg, which)
    logs = cfg.out / "logs"
    if which == "detector":
        _seeded(cfg.seed)
        hp = cfg.detector_hp
        model = AspectDetector(inventory, cfg.encoder, hp.dropout, hp.threshold, hp.alpha)
        target = cfg.checkpoint_dir("detector")
        train(model, bundle, hp, log_path=logs / "detector.jsonl", checkpoint_dir=target,
              provenance=cfg.provenance())
        return [target]

    written = []
    for mode in modes or training_modes(cfg.modes):
        _seeded(cfg.seed)
        hp = cfg.sentiment_hp
        model = SentimentPredictor(cfg.encoder, hp.dropout)
        framing = SentimentFraming(mode, inventory, cfg.null_target)
        target = cfg.checkpoint_dir(f"sentiment-{mode}")
        train(model, bundle, hp, framing, log_path=logs / f"sentiment-{mode}.jsonl",
              checkpoint_dir=target, provenance=cfg.provenance())
        written.append(target)
    return written


def training_modes(eval_modes) -> list[str]:
    """Sentiment predictors needed for a list of evaluation modes."""
    need = []
    for m in eval_modes:
        t = "right" if m == "predicted" else m
        if t not in need:
            need.append(t)
    return need


def _eval_records(cfg: RunConfig):
    role = "eval" if "eval" in cfg.datasets else "detector"
    bundle, inventory = load_bundle(cfg, role)
    return with_polarity(bundle.test), inventory


def cmd_eval(cfg: RunConfig, modes: list[str] | None = None) -> list[Path]:
    modes = modes or cfg.modes
    records, inventory = _eval_records(cfg)
    if not records:
        raise ConfigError("evaluation split has no records with gold polarity")
    detector = None
    written = []
    if "predicted" in modes or (cfg.checkpoint_dir("detector") / "manifest.json").exists():
        ckpt = cfg.checkpoint_dir("detector")
        if not (ckpt / "manifest.json").exists():
            raise ConfigError(f"mode 'predicted' needs a detector checkpoint at {ckpt}")
        detector = AspectDetector.load(ckpt)
        det_bundle, _ = load_bundle(cfg, "detector")
        report = evaluate(detector, det_bundle.test, "detect")
        report.update(task="detect", encoder=cfg.encoder.name, n_records=len(det_bundle.test), **cfg.provenance())
        _write_json(cfg.out / "reports" / "detector.json", report)
        written.append(cfg.out / "reports" / "detector.json")

    for mode in modes:
        ckpt = cfg.checkpoint_dir(f"sentiment-{training_modes([mode])[0]}")
        if not (ckpt / "manifest.json").exists():
            raise ConfigError(f"mode {mode!r} needs a sentiment checkpoint at {ckpt}")
        predictor = SentimentPredictor.load(ckpt)
        pcfg = PipelineConfig(mode=mode, fallback=cfg.fallback, null_target=cfg.null_target, inventory=inventory)
        report, dump = cross_domain_eval(records, predictor, mode, detector=detector, inventory=inventory, cfg=pcfg)
        report.update(task="sentiment", mode=mode, encoder=cfg.encoder.name, n_records=len(records),
                      **cfg.provenance())
        path = cfg.out / "reports" / f"{mode}.json"
        _write_json(path, report)
        pred_path = cfg.out / "predictions" / f"{mode}.jsonl"
        pred_path.parent.mkdir(parents=True, exist_ok=True)
        with open(pred_path, "w", encoding="utf-8") as fh:
            for row in dump:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        written.append(path)
    return written


def render_report(run_dir) -> tuple[str, str]:
    """Text table and CSV with one row per (encoder, mode)."""
    run_dir = Path(run_dir)
    reports_dir = run_dir / "reports" if (run_dir / "reports").is_dir() else run_dir
    rows = []
    detection = []
    for path in sorted(reports_dir.glob("*.json")):
        rep = json.loads(path.read_text())
        if rep.get("task") == "detect":
            detection.append(rep)
        elif rep.get("task") == "sentiment":
            rows.append(rep)
    if not rows and not detection:
        raise ConfigError(f"no report files in {reports_dir}")
    order = {m: i for i, m in enumerate(("right", "all", "none", "predicted"))}
    rows.sort(key=lambda r: (r["encoder"], order.get(r["mode"], 99)))

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["encoder", "mode", "f1_micro", "f1_macro"])
    for r in rows:
        writer.writerow([r["encoder"], r["mode"], repr(r["f1_micro"]), repr(r["f1_macro"])])

    lines = []
    if detection:
        lines.append(f"{'aspect detection':<22}{'F1-macro':>10}{'F1-micro':>10}{'JS':>10}{'precision':>11}{'recall':>10}")
        for d in detection:
            lines.append(f"{d['encoder']:<22}{d['f1_macro']:>10.4f}{d['f1_micro']:>10.4f}{d['jaccard']:>10.4f}"
                         f"{d['precision']:>11.4f}{d['recall']:>10.4f}")
        lines.append("")
    if rows:
        lines.append(f"{'encoder':<14}{'mode':<12}{'F1-micro':>10}{'F1-macro':>10}")
        for r in rows:
            lines.append(f"{r['encoder']:<14}{r['mode']:<12}{r['f1_micro']:>10.4f}{r['f1_macro']:>10.4f}")
    return "\n".join(lines) + "\n", buf.getvalue()


def cmd_report(run_dir) -> tuple[Path, Path]:
    text, table = render_report(run_dir)
    run_dir = Path(run_dir)
    (run_dir / "report.txt").write_text(text)
    (run_dir / "report.csv").write_text(table)
    sys.stdout.write(text)
    return run_dir / "report.txt", run_dir / "report.csv"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="auxabsa", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("prepare", "train-detector", "train-sentiment", "eval", "report"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "report", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")
        if name in ("train-sentiment", "eval"):
            p.add_argument("--mode", action="append", choices=EVAL_MODES,
                           help="repeatable; defaults to the config's mode list")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            if args.out is None and args.config is None:
                raise ConfigError("report needs --out or --config")
            run_dir = args.out or RunConfig.from_file(args.config, args.seed).out
            cmd_report(run_dir)
            return 0
        cfg = RunConfig.from_file(args.config, args.seed, args.out)
        if args.command == "prepare":
            cmd_prepare(cfg)
        elif args.command == "train-detector":
            cmd_train(cfg, "detector")
        elif args.command == "train-sentiment":
            cmd_train(cfg, "sentiment", training_modes(args.mode) if args.mode else None)
        elif args.command == "eval":
            cmd_eval(cfg, args.mode)
    except (ConfigError, CorpusError, EncodingError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingAborted, PipelineError, RuntimeError) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
