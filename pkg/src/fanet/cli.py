"""Command-line entry point.

Usage:
    fanet gen-data
    fanet train --stage 1.1
    fanet train --stage 2 --ablate no-rsa
    fanet eval --protocol verify-rsa
    fanet eval --protocol verify-rsa --ablate no-rsa
    fanet normalize --checkpoint runs/default/stage2.ckpt --input probe.png --output face.png
    fanet gradcheck
    fanet report

Exit codes: 0 success, 1 gradient check failure, 2 usage error, 3 invalid input or
config, 4 missing prerequisite or bad checkpoint, 5 divergence, 6 protocol error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

import torch
from pydantic import ValidationError

from fanet.config import Ablation, ModelName, RunConfig, Stage
from fanet.datagen.dataset import generate_dataset
from fanet.datagen.manifest import load_image, save_image, write_dataset
from fanet.evaluation.inference import normalize_face
from fanet.evaluation.protocols import PROTOCOLS, evaluate
from fanet.evaluation.report import format_reports, load_reports
from fanet.exceptions import (
    ConfigValidationError,
    FanError,
    InputValidationError,
    PrerequisiteError,
)
from fanet.nets.checkpoint import load_checkpoint
from fanet.nets.gradcheck import gradcheck_suite
from fanet.training.rundir import RunDirectory, train

STAGES = {
    "1.1": Stage.PRETRAIN,
    "1.2": Stage.DISENTANGLE,
    "2": Stage.ADAPT,
    "finetune": Stage.FINETUNE,
}

DTYPES = {"float64": torch.float64, "float32": torch.float32}


def load_config(path: Path | None, seed: int | None = None) -> RunConfig:
    """The run config from a JSON file, or the defaults, with an optional seed override.

    Raises:
        ConfigValidationError: If the file is missing or fails validation.
    """
    try:
        cfg = RunConfig() if path is None else RunConfig.model_validate_json(path.read_text())
        if seed is not None:
            cfg = RunConfig.model_validate({**cfg.model_dump(), "seed": seed})
    except OSError as exc:
        raise ConfigValidationError(f"cannot read config {path}: {exc}", path=str(path)) from exc
    except ValidationError as exc:
        raise ConfigValidationError(f"invalid config: {exc}", path=str(path)) from exc
    return cfg


def cmd_gen_data(cfg: RunConfig, args: argparse.Namespace) -> int:
    root = args.output or cfg.paths.dataset_dir
    dataset = generate_dataset(cfg.dataset, cfg.net.image_side)
    manifest = write_dataset(root, dataset)
    print(f"Wrote {len(dataset)} samples of {cfg.dataset.n_identities} identities: {manifest}")
    return 0


def cmd_train(cfg: RunConfig, args: argparse.Namespace) -> int:
    stage = STAGES[args.stage]
    ablation = Ablation(args.ablate) if args.ablate else None
    result = train(cfg, stage, ablation=ablation, resume=args.resume)
    target = RunDirectory(cfg).checkpoint(stage, ablation)
    print(f"Stage {stage}: {result.steps} steps, checkpoint {target}")
    return 0


def cmd_eval(cfg: RunConfig, args: argparse.Namespace) -> int:
    ablation = Ablation(args.ablate) if args.ablate else None
    report = evaluate(cfg, args.protocol, checkpoint=args.checkpoint, ablation=ablation)
    print(format_reports([report]))
    return 0


def cmd_normalize(cfg: RunConfig, args: argparse.Namespace) -> int:
    store, _ = load_checkpoint(args.checkpoint, cfg.net)
    store.require(ModelName.ENC_L, ModelName.DEC)
    img = load_image(args.input)
    if img.side < cfg.degradation.n_low:
        raise InputValidationError(
            f"input is {img.side}×{img.side}; normalization needs at least "
            f"{cfg.degradation.n_low}×{cfg.degradation.n_low}",
            side=img.side,
        )
    torch.use_deterministic_algorithms(True)
    save_image(normalize_face(store.eval(), img), args.output)
    print(f"Wrote {args.output}")
    return 0


def cmd_gradcheck(cfg: RunConfig, args: argparse.Namespace) -> int:
    results = gradcheck_suite(DTYPES[args.dtype], seed=cfg.seed)
    width = max(len(result.name) for result in results)
    for result in results:
        status = "pass" if result.passed else "FAIL"
        line = f"{result.name:<{width}}  {status}  {result.seconds:6.2f}s"
        print(f"{line}  {result.detail}" if result.detail else line)
    failed = [result.name for result in results if not result.passed]
    if failed:
        print(f"{len(failed)} of {len(results)} checks failed", file=sys.stderr)
        return 1
    print(f"All {len(results)} checks passed")
    return 0


def cmd_report(cfg: RunConfig, args: argparse.Namespace) -> int:
    run = RunDirectory(cfg)
    reports = load_reports(run.reports_dir)
    if not reports:
        raise PrerequisiteError(f"no reports in {run.reports_dir}; run eval first")
    print(format_reports(reports))
    return 0


COMMANDS: dict[str, Callable[[RunConfig, argparse.Namespace], int]] = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "normalize": cmd_normalize,
    "gradcheck": cmd_gradcheck,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fanet",
        description="Train and evaluate feature adaptation networks on a synthetic face dataset.",
    )
    parser.add_argument("--config", type=Path, help="JSON run config (default: built-in defaults)")
    parser.add_argument(
        "--print-config", action="store_true", help="print the effective config and exit"
    )
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug detail")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    gen = commands.add_parser("gen-data", help="render the synthetic dataset")
    gen.add_argument("--output", type=Path, help="dataset directory (default: paths.dataset_dir)")

    trainer = commands.add_parser("train", help="run one training stage")
    trainer.add_argument("--stage", required=True, choices=list(STAGES))
    trainer.add_argument(
        "--ablate", choices=[ablation.value for ablation in Ablation], help="stage-2 variant"
    )
    trainer.add_argument(
        "--resume", action="store_true", help="reuse the stage checkpoint if it already exists"
    )

    evaluator = commands.add_parser("eval", help="run an evaluation protocol")
    evaluator.add_argument(
        "--protocol", required=True, help=f"one of: {', '.join(sorted(PROTOCOLS))}"
    )
    source = evaluator.add_mutually_exclusive_group()
    source.add_argument(
        "--checkpoint", type=Path, help="checkpoint (default: latest in the run directory)"
    )
    source.add_argument(
        "--ablate",
        choices=[ablation.value for ablation in Ablation],
        help="evaluate the latest checkpoint trained with this ablation",
    )

    normalize = commands.add_parser("normalize", help="normalize one face image")
    normalize.add_argument("--checkpoint", type=Path, required=True)
    normalize.add_argument("--input", type=Path, required=True)
    normalize.add_argument("--output", type=Path, required=True)

    grad = commands.add_parser("gradcheck", help="finite-difference check of every gradient")
    grad.add_argument("--dtype", choices=list(DTYPES), default="float64")

    commands.add_parser("report", help="print every report in the run directory")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        cfg = load_config(args.config, args.seed)
        if args.print_config:
            print(cfg.model_dump_json(indent=2))
            return 0
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 2
        RunDirectory(cfg).snapshot()
        return COMMANDS[args.command](cfg, args)
    except FanError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        print(f"Error: {e}", file=sys.stderr)
        return ConfigValidationError.exit_code


if __name__ == "__main__":
    sys.exit(main())
