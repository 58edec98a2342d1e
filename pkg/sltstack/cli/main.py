"""
Command Line Interface
Subcommands for data generation, training, decoding, evaluation and experiment reports
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import ValidationError
from rich.console import Console

from ..decoding.beam import DecodeConfig, beam_search
from ..decoding.cascade import CASCADE_MODES, cascade_decode
from ..decoding.parallel import decode_corpus
from ..decoding.scorers import ModelScorer
from ..errors import SltError, StageError
from ..metrics.report import evaluate
from ..numcore.params import load_checkpoint, save_checkpoint
from ..tasks.corpus import SPLITS, CorpusConfig, make_splits, read_dataset, write_dataset
from ..tasks.tokenize import ids_to_text
from ..training.checkpoints import average_checkpoints
from ..utils.logging_setup import setup_logging
from ..utils.results_store import ResultsStore
from ..utils.settings import load_settings
from .bundle import EPOCHS_DIR, PARAMS_FILE, ModelBundle
from .config import ExperimentConfig
from .report import compare_report
from .runner import ExperimentRunner, run_experiment

logger = logging.getLogger(__name__)
console = Console()
err_console = Console(stderr=True)


def _write_lines(path: Path, lines: List[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def _write_jsonl(path: Path, records: List[dict]) -> None:
    _write_lines(path, [json.dumps(r, sort_keys=True) for r in records])


def _decode_config(args, base: Optional[DecodeConfig] = None) -> DecodeConfig:
    base = base or DecodeConfig()
    updates = {
        key: value
        for key, value in (
            ("beam", args.beam),
            ("length_penalty_alpha", args.alpha),
            ("eos_gamma", args.gamma),
            ("max_len", args.max_len),
            ("n_best", args.n_best),
        )
        if value is not None
    }
    return DecodeConfig.model_validate({**base.model_dump(), **updates})


# *** subcommands ***
def cmd_gen(args, settings) -> None:
    task = ExperimentConfig.from_file(args.config).task if args.config else CorpusConfig()
    splits = make_splits(task, args.seed)
    for split, examples in splits.items():
        write_dataset(Path(args.out) / f"{split}.jsonl", examples)
    console.print(f"wrote {sum(len(v) for v in splits.values())} examples to {args.out}")


def cmd_train(args, settings) -> None:
    cfg = ExperimentConfig.from_file(args.config, kind=args.role, data_dir=args.data)
    runner = ExperimentRunner(cfg, workers=settings.workers, work_dir=args.out)
    bundle = runner.train_role(args.role)
    console.print(f"trained {args.role} model ({bundle.model.num_parameters()} parameters) in {Path(args.out) / args.role}")


def cmd_average(args, settings) -> None:
    model_dir = Path(args.model_dir)
    files = [Path(p) for p in args.checkpoints] if args.checkpoints else sorted((model_dir / EPOCHS_DIR).glob("epoch*.sqbr"))
    if not files:
        raise StageError("average", f"no checkpoints found under {model_dir / EPOCHS_DIR}")
    files = files[-args.last:]
    averaged = average_checkpoints([load_checkpoint(p) for p in files])
    out = Path(args.out) if args.out else model_dir / PARAMS_FILE
    save_checkpoint(out, averaged.snapshot())
    console.print(f"averaged {len(files)} checkpoints into {out}")


def cmd_decode(args, settings) -> None:
    bundle = ModelBundle.load(args.model_dir)
    examples = read_dataset(Path(args.data) / f"{args.split}.jsonl")
    cfg = _decode_config(args)
    alpha = cfg.length_penalty_alpha

    def one(ex):
        return beam_search(ModelScorer.for_input(bundle.model, bundle.inputs_for(ex)), cfg)

    results = decode_corpus(one, examples, workers=settings.workers)
    best, nbest, texts = [], [], []
    for ex, hyps in zip(examples, results):
        hyps = hyps or []
        nbest.append({
            "utt_id": ex.uid,
            "hypotheses": [
                {
                    "hypothesis_text": ids_to_text(hyp.tokens, bundle.output_vocab),
                    "logprob": hyp.logprob,
                    "normalized_score": hyp.normalized_score(alpha),
                }
                for hyp in hyps
            ],
        })
        text = ids_to_text(hyps[0].tokens, bundle.output_vocab) if hyps else ""
        texts.append(text)
        best.append({
            "utt_id": ex.uid,
            "hypothesis_text": text,
            "logprob": hyps[0].logprob if hyps else None,
            "normalized_score": hyps[0].normalized_score(alpha) if hyps else None,
        })
    out = Path(args.out)
    _write_jsonl(out / "hyps.jsonl", best)
    _write_jsonl(out / "nbest.jsonl", nbest)
    _write_lines(out / "hyp.txt", texts)
    field = "source_text" if bundle.role == "asr" else "target_text"
    _write_lines(out / "ref.txt", [getattr(ex, field) for ex in examples])
    console.print(f"decoded {len(examples)} utterances into {out}")


def cascade_configs(args) -> Tuple[DecodeConfig, DecodeConfig]:
    """
    ASR and MT beam settings of the cascade subcommand

    Without ``--n-best`` the ASR keeps as many transcripts as an experiment
    does, capped by the beam.
    """
    cfg_asr = _decode_config(args, DecodeConfig(beam=10))
    if args.n_best is None:
        n_best = min(ExperimentConfig.model_fields["n_best"].default, cfg_asr.beam)
        cfg_asr = cfg_asr.model_copy(update={"n_best": n_best})
    cfg_mt = DecodeConfig(beam=args.mt_beam, length_penalty_alpha=args.mt_alpha)
    return cfg_asr, cfg_mt


def cmd_cascade(args, settings) -> None:
    asr, mt = ModelBundle.load(args.asr), ModelBundle.load(args.mt)
    examples = read_dataset(Path(args.data) / f"{args.split}.jsonl")
    cfg_asr, cfg_mt = cascade_configs(args)

    def one(ex):
        return cascade_decode(asr.model, mt.model, asr.inputs_for(ex), args.mode, cfg_asr, cfg_mt, asr.output_vocab, mt.input_vocab)

    results = decode_corpus(one, examples, workers=settings.workers)
    records, texts = [], []
    for ex, result in zip(examples, results):
        text = ids_to_text(result.translation.tokens, mt.output_vocab) if result else ""
        texts.append(text)
        records.append({
            "utt_id": ex.uid,
            "hypothesis_text": text,
            "transcript": ids_to_text(result.transcript.tokens, asr.output_vocab) if result else "",
            "logprob": result.translation.logprob if result else None,
            "combined_score": result.combined_score if result else None,
            "transcripts_translated": len(result.transcripts) if result else 0,
        })
    out = Path(args.out)
    _write_jsonl(out / "hyps.jsonl", records)
    _write_lines(out / "hyp.txt", texts)
    _write_lines(out / "ref.txt", [ex.target_text for ex in examples])
    console.print(f"cascade-decoded {len(examples)} utterances ({args.mode}) into {out}")


def cmd_evaluate(args, settings) -> None:
    refs = Path(args.ref).read_text(encoding="utf-8").splitlines()
    hyps = Path(args.hyp).read_text(encoding="utf-8").splitlines()
    report = evaluate(refs, hyps)
    console.print_json(json.dumps(report.to_dict()))
    console.print(report.summary(), markup=False, highlight=False)


def cmd_experiment(args, settings) -> None:
    cfg = ExperimentConfig.from_file(args.config)
    results_dir = Path(args.results_dir) if args.results_dir else settings.results_dir
    rows = run_experiment(cfg, results_dir, workers=settings.workers)
    console.print(compare_report(rows).render(), markup=False, highlight=False)


def cmd_report(args, settings) -> None:
    results_dir = Path(args.results_dir) if args.results_dir else settings.results_dir
    rows = ResultsStore(results_dir).read()
    if args.experiments:
        rows = [r for r in rows if r.get("experiment_id") in args.experiments]
    if args.dataset:
        rows = [r for r in rows if r.get("dataset_id") == args.dataset]
    report = compare_report(rows)
    report.write(args.out or results_dir)
    console.print(report.render(), markup=False, highlight=False)


# *** parser ***
def _add_decode_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--beam", type=int, default=None, help="beam width")
    parser.add_argument("--alpha", type=float, default=None, help="length penalty exponent")
    parser.add_argument("--gamma", type=float, default=None, help="EOS threshold")
    parser.add_argument("--max-len", type=int, default=None, help="maximum output length")
    parser.add_argument("--n-best", type=int, default=None, help="hypotheses kept per utterance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sltstack", description="Desk-scale spoken language translation experiments")
    parser.add_argument("--log-level", default=None, help="overrides SLT_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate the synthetic train/dev/test splits")
    p.add_argument("--config", default=None, help="experiment config whose task section is used")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a stand-alone ASR, MT or end-to-end model")
    p.add_argument("--config", required=True)
    p.add_argument("--role", choices=("asr", "mt", "e2e"), required=True)
    p.add_argument("--data", required=True, help="directory written by gen")
    p.add_argument("--out", required=True, help="models directory; the bundle goes to OUT/ROLE")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("average", help="average the last epoch checkpoints of a model")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--last", type=int, default=5)
    p.add_argument("--checkpoints", nargs="*", default=None, help="explicit checkpoint files")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_average)

    p = sub.add_parser("decode", help="beam-decode a split with one model")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=SPLITS, default="test")
    p.add_argument("--out", required=True)
    _add_decode_flags(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("cascade", help="ASR then MT decoding of a split")
    p.add_argument("--asr", required=True, help="ASR model directory")
    p.add_argument("--mt", required=True, help="MT model directory")
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=SPLITS, default="test")
    p.add_argument("--mode", choices=CASCADE_MODES, default="ranked_n_best")
    p.add_argument("--mt-beam", type=int, default=5)
    p.add_argument("--mt-alpha", type=float, default=0.8)
    p.add_argument("--out", required=True)
    _add_decode_flags(p)
    p.set_defaults(func=cmd_cascade)

    p = sub.add_parser("evaluate", help="score line-aligned hypothesis and reference files")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run one experiment config end to end")
    p.add_argument("--config", required=True)
    p.add_argument("--results-dir", default=None, help="overrides SLT_RESULTS_DIR")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="comparison table over stored result rows")
    p.add_argument("--results-dir", default=None, help="overrides SLT_RESULTS_DIR")
    p.add_argument("--experiments", nargs="*", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--out", default=None, help="directory for report.txt and report.csv")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings()
        setup_logging(args.log_level or settings.log_level)
        args.func(args, settings)
    except StageError as e:
        err_console.print(f"failed in stage {e.stage}: {e}", markup=False, highlight=False)
        return 1
    except (SltError, ValidationError, ValueError, OSError) as e:
        err_console.print(f"failed in stage {args.command}: {e}", markup=False, highlight=False)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
