"""
Experiment Runner
Data, training, averaging, decoding and scoring for one experiment of the grid
"""

import logging
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from ..decoding.beam import DecodeConfig, beam_search
from ..decoding.cascade import cascade_decode
from ..decoding.joint_decode import joint_decode
from ..decoding.parallel import decode_corpus
from ..decoding.scorers import ModelScorer
from ..errors import StageError
from ..metrics.report import evaluate
from ..metrics.wer import error_counts
from ..tasks.corpus import SPLITS, ParallelExample, make_splits, read_dataset
from ..tasks.tokenize import build_vocabulary, ids_to_text
from ..tasks.vocabulary import Vocabulary
from ..training.augment import augment_with_hypotheses
from ..training.batching import encode_examples
from ..training.checkpoints import average_last
from ..training.config import TrainConfig
from ..training.joint import JointModel, init_joint_from_pretrained
from ..training.trainer import TrainResult, train, train_joint, write_loss_curve
from ..transformer.model import SeqModel
from ..utils.results_store import ResultsStore
from .bundle import EPOCHS_DIR, ModelBundle
from .config import CASCADE_KINDS, PRETRAIN_KINDS, ExperimentConfig

logger = logging.getLogger(__name__)

ROLE_SEEDS = {"asr": 0, "mt": 1, "e2e": 2, "joint": 3}


@dataclass
class TaskData:
    splits: Dict[str, List[ParallelExample]]
    asr_vocab: Vocabulary
    mt_src_vocab: Vocabulary
    tgt_vocab: Vocabulary


def load_task_data(cfg: ExperimentConfig) -> TaskData:
    """Generate the synthetic splits (or read them from ``data_dir``) and build the vocabularies"""
    if cfg.data_dir is not None:
        splits = {split: read_dataset(Path(cfg.data_dir) / f"{split}.jsonl") for split in SPLITS}
    else:
        splits = make_splits(cfg.task, cfg.seed)
    sources = [ex.source_text for ex in splits["train"]]
    targets = [ex.target_text for ex in splits["train"]]
    return TaskData(
        splits=splits,
        asr_vocab=build_vocabulary(cfg.asr_unit, sources),
        mt_src_vocab=build_vocabulary(cfg.mt_src_unit, sources),
        tgt_vocab=build_vocabulary(cfg.mt_tgt_unit, targets),
    )


class ExperimentRunner:
    """
    Runs one ExperimentConfig end to end

    Every stage failure is re-raised as StageError after the rows finished so
    far and a ``failed:<stage>`` row have been appended to the results file.
    """

    def __init__(
        self,
        cfg: ExperimentConfig,
        results_dir: Optional[Union[str, Path]] = None,
        workers: int = 1,
        work_dir: Optional[Union[str, Path]] = None,
    ):
        self.cfg = cfg
        self.workers = workers
        self.store = ResultsStore(results_dir) if results_dir is not None else None
        if work_dir is None and results_dir is not None:
            work_dir = Path(results_dir) / "runs" / cfg.name
        self.work_dir = Path(work_dir) if work_dir is not None else None
        self.config_hash = cfg.content_hash()
        self.rows: List[Dict] = []
        self.data: Optional[TaskData] = None

    # *** bookkeeping ***
    @contextmanager
    def _stage(self, name: str):
        logger.info("[%s] stage %s", self.cfg.name, name)
        try:
            yield
        except StageError:
            raise
        except Exception as e:
            raise StageError(name, f"{type(e).__name__}: {e}") from e

    def _base_row(self) -> Dict:
        return {
            "experiment_id": self.cfg.name,
            "kind": self.cfg.kind,
            "dataset_id": self.cfg.dataset_id,
            "config_hash": self.config_hash,
        }

    def _decode_settings(self) -> Dict:
        return {
            "beam_asr": self.cfg.decode_asr.beam,
            "beam_mt": self.cfg.decode_mt.beam,
            "alpha_asr": self.cfg.decode_asr.length_penalty_alpha,
            "alpha_mt": self.cfg.decode_mt.length_penalty_alpha,
            "eos_gamma": self.cfg.decode_asr.eos_gamma,
            "n_best": self.cfg.n_best,
        }

    def _artifact_dir(self, name: str) -> Optional[Path]:
        return self.work_dir / name if self.work_dir is not None else None

    # *** entry point ***
    def run(self) -> List[Dict]:
        handlers: Dict[str, Callable[[], None]] = {
            "asr": lambda: self._single("asr"),
            "mt": lambda: self._single("mt"),
            "e2e": lambda: self._single("e2e"),
            "joint": self._joint,
            "joint_ensemble": self._joint_ensemble,
            "augmented": self._augmented,
            "emb_avg": self._emb_avg,
        }
        if self.cfg.kind in CASCADE_KINDS:
            handler = self._cascade
        elif self.cfg.kind in PRETRAIN_KINDS:
            handler = self._pretrain
        else:
            handler = handlers[self.cfg.kind]

        try:
            self.prepare()
            handler()
        except StageError as e:
            logger.error("Experiment %s failed in stage %s", self.cfg.name, e.stage)
            self.rows.append({**self._base_row(), "status": f"failed:{e.stage}", "error": str(e)})
            self._persist()
            raise
        with self._stage("persist"):
            self._persist()
        return self.rows

    def _persist(self) -> None:
        if self.store is not None:
            self.store.append(self.rows)

    # *** training ***
    def prepare(self) -> TaskData:
        if self.data is None:
            with self._stage("data"):
                self.data = load_task_data(self.cfg)
        return self.data

    def train_role(self, role: str) -> ModelBundle:
        """Train one stand-alone role on the configured data; saved under ``work_dir/<role>``"""
        self.prepare()
        return self._train_role(role)

    def _train_cfg(self, role: str, **overrides) -> TrainConfig:
        updates = {"seed": self.cfg.train.seed + ROLE_SEEDS[role]}
        if not (role == "mt" and self.cfg.kind == "emb_avg"):
            updates["emb_avg_rate"] = 0.0
        updates.update(overrides)
        return self.cfg.train.model_copy(update=updates)

    def _role_setup(self, role: str):
        """(model config, output vocab, input vocab, output field) of a stand-alone role"""
        data, spec = self.data, self.cfg.models[role]
        feature_dim = self.cfg.task.features.feature_dim
        if role == "asr":
            return spec.build("speech", len(data.asr_vocab), feature_dim=feature_dim), data.asr_vocab, None, "source"
        if role == "mt":
            return spec.build("text", len(data.tgt_vocab), vocab_src=len(data.mt_src_vocab)), data.tgt_vocab, data.mt_src_vocab, "target"
        return spec.build("speech", len(data.tgt_vocab), feature_dim=feature_dim), data.tgt_vocab, None, "target"

    def _average_into(self, load: Callable, result: TrainResult, what: str) -> None:
        if not result.checkpoints:
            logger.warning("No checkpoints for %s; keeping the initial parameters", what)
            return
        load(average_last(result.checkpoints, self.cfg.train.average_last).snapshot())
        directory = self._artifact_dir(what)
        if directory is not None:
            write_loss_curve(directory / "loss.csv", result.loss_curve)

    def _train_role(self, role: str, examples: Optional[Sequence[ParallelExample]] = None) -> ModelBundle:
        """Train (or load, when a checkpoint is configured) a stand-alone model"""
        if role in self.cfg.checkpoints:
            with self._stage(f"load:{role}"):
                return ModelBundle.load(self.cfg.checkpoints[role])
        with self._stage(f"train:{role}"):
            model_cfg, out_vocab, in_vocab, field = self._role_setup(role)
            bundle = ModelBundle(role, SeqModel(model_cfg, seed=self.cfg.seed + ROLE_SEEDS[role]), out_vocab, in_vocab)
            corpus = encode_examples(examples or self.data.splits["train"], out_vocab, in_vocab, field)
            dev = encode_examples(self.data.splits["dev"], out_vocab, in_vocab, field)
            self._fit(bundle, corpus, dev, self._train_cfg(role))
            return bundle

    def _fit(self, bundle: ModelBundle, corpus, dev, train_cfg: TrainConfig, tag: str = "") -> None:
        directory = self._artifact_dir(bundle.role + tag)
        checkpoint_dir = directory / EPOCHS_DIR if directory is not None else None
        result = train(bundle.model, corpus, train_cfg, dev, checkpoint_dir)
        self._average_into(bundle.model.params.load, result, bundle.role + tag)
        if directory is not None:
            bundle.save(directory)

    def _joint_corpus(self, split: str):
        data = self.data
        return encode_examples(data.splits[split], data.tgt_vocab, None, "target", aux_vocab=data.asr_vocab)

    def _fit_joint(self, joint: JointModel) -> JointModel:
        train_cfg = self._train_cfg("joint", freeze_mode=joint.freeze_mode)
        directory = self._artifact_dir("joint")
        checkpoint_dir = directory / EPOCHS_DIR if directory is not None else None
        result = train_joint(joint, self._joint_corpus("train"), train_cfg, self._joint_corpus("dev"), checkpoint_dir)
        self._average_into(joint.load, result, "joint")
        return joint

    def _train_joint_from_scratch(self) -> JointModel:
        with self._stage("train:joint"):
            asr_cfg = self._role_setup("asr")[0]
            mt_cfg = self._role_setup("mt")[0]
            joint = JointModel(
                SeqModel(asr_cfg, seed=self.cfg.seed + ROLE_SEEDS["asr"]),
                SeqModel(mt_cfg, seed=self.cfg.seed + ROLE_SEEDS["mt"]),
                connector_kind=self.cfg.connector,
                freeze_mode="full",
                connector_layers=self.cfg.connector_layers,
                seed=self.cfg.seed + ROLE_SEEDS["joint"],
            )
            return self._fit_joint(joint)

    # *** scoring ***
    def _score(
        self,
        system: str,
        split: str,
        hyps: Sequence[str],
        field: str = "target",
        transcripts: Optional[Sequence[str]] = None,
        skipped: int = 0,
    ) -> None:
        with self._stage("evaluate"):
            examples = self.data.splits[split]
            refs = [ex.target_text if field == "target" else ex.source_text for ex in examples]
            report = evaluate(refs, hyps)
            row = {
                **self._base_row(),
                "system": system,
                "split": split,
                "status": "ok",
                **report.to_dict(),
                "skipped": skipped,
                "decode": self._decode_settings(),
            }
            if transcripts is not None:
                row["asr_wer"] = error_counts([ex.source_text for ex in examples], transcripts).rate
            self.rows.append(row)
            logger.info("%s %s: %s", system, split, report.summary())

    def _decode_all(self, stage: str, decode_one: Callable, examples: Sequence[ParallelExample]) -> Tuple[List, int]:
        with self._stage(stage):
            results = decode_corpus(decode_one, examples, workers=self.workers)
        return results, sum(r is None for r in results)

    def _decode_bundle(self, bundle: ModelBundle, split: str, decode_cfg: DecodeConfig, system: str, field: str) -> None:
        def one(ex: ParallelExample) -> str:
            best = beam_search(ModelScorer.for_input(bundle.model, bundle.inputs_for(ex)), decode_cfg)[0]
            return ids_to_text(best.tokens, bundle.output_vocab)

        results, skipped = self._decode_all(f"decode:{system}", one, self.data.splits[split])
        self._score(system, split, [r or "" for r in results], field, skipped=skipped)

    def _decode_cascade(self, asr: ModelBundle, mt: ModelBundle, mode: str, split: str, system: str) -> None:
        cfg_asr = self.cfg.asr_decode(self.cfg.n_best)

        def one(ex: ParallelExample) -> Tuple[str, str]:
            result = cascade_decode(
                asr.model, mt.model, asr.inputs_for(ex), mode, cfg_asr, self.cfg.decode_mt, asr.output_vocab, mt.input_vocab,
            )
            return ids_to_text(result.translation.tokens, mt.output_vocab), ids_to_text(result.transcript.tokens, asr.output_vocab)

        results, skipped = self._decode_all(f"decode:{system}", one, self.data.splits[split])
        pairs = [r or ("", "") for r in results]
        self._score(system, split, [p[0] for p in pairs], transcripts=[p[1] for p in pairs], skipped=skipped)

    def _decode_joint(
        self,
        joint: JointModel,
        split: str,
        system: str,
        variant: str = "stand-alone",
        asr: Optional[ModelBundle] = None,
        mt: Optional[ModelBundle] = None,
    ) -> None:
        data = self.data
        cfg_asr = self.cfg.asr_decode(self.cfg.n_best)

        def one(ex: ParallelExample) -> Tuple[str, str]:
            result = joint_decode(
                joint, ex.features.frames, cfg_asr, self.cfg.decode_mt, variant,
                asr_partner=asr.model if asr else None,
                mt_partner=mt.model if mt else None,
                asr_vocab=data.asr_vocab,
                mt_src_vocab=mt.input_vocab if mt else None,
            )
            return ids_to_text(result.translation.tokens, data.tgt_vocab), ids_to_text(result.transcript.tokens, data.asr_vocab)

        results, skipped = self._decode_all(f"decode:{system}", one, data.splits[split])
        pairs = [r or ("", "") for r in results]
        self._score(system, split, [p[0] for p in pairs], transcripts=[p[1] for p in pairs], skipped=skipped)

    # *** experiment kinds ***
    def _single(self, role: str) -> None:
        bundle = self._train_role(role)
        decode_cfg = self.cfg.asr_decode() if role == "asr" else self.cfg.decode_mt
        field = "source" if role == "asr" else "target"
        for split in self.cfg.eval_splits:
            self._decode_bundle(bundle, split, decode_cfg, role, field)

    def _cascade(self) -> None:
        mode = CASCADE_KINDS[self.cfg.kind]
        asr, mt = self._train_role("asr"), self._train_role("mt")
        for split in self.cfg.eval_splits:
            self._decode_cascade(asr, mt, mode, split, f"cascade:{mode}")

    def _joint(self) -> None:
        joint = self._train_joint_from_scratch()
        for split in self.cfg.eval_splits:
            self._decode_joint(joint, split, "joint")

    def _joint_ensemble(self) -> None:
        asr, mt = self._train_role("asr"), self._train_role("mt")
        joint = self._train_joint_from_scratch()
        for variant in self.cfg.ensemble_variants:
            for split in self.cfg.eval_splits:
                self._decode_joint(joint, split, f"joint:{variant}", variant, asr, mt)

    def _pretrain(self) -> None:
        connector, freeze_mode = PRETRAIN_KINDS[self.cfg.kind]
        asr, mt = self._train_role("asr"), self._train_role("mt")
        with self._stage("train:joint"):
            joint = init_joint_from_pretrained(
                asr.model.params.snapshot(),
                mt.model.params.snapshot(),
                asr.model.config,
                mt.model.config,
                connector_kind=connector,
                freeze_mode=freeze_mode,
                connector_layers=max(self.cfg.connector_layers, 1),
                seed=self.cfg.seed + ROLE_SEEDS["joint"],
            )
            self._fit_joint(joint)
        for split in self.cfg.eval_splits:
            self._decode_joint(joint, split, "joint")

    def _oracle_and_asr_rows(self, asr: ModelBundle, mt: ModelBundle) -> None:
        """MT scored on the oracle source text and on 1-best ASR output"""
        for split in self.cfg.eval_splits:
            self._decode_bundle(mt, split, self.cfg.decode_mt, "mt:oracle", "target")
            self._decode_cascade(asr, mt, "one_best", split, "mt:asr")

    def _augmented(self) -> None:
        asr = self._train_role("asr")
        with self._stage("augment"):
            augmented = augment_with_hypotheses(
                self.data.splits["train"], asr.model, asr.output_vocab,
                decode_cfg=self.cfg.asr_decode(), workers=self.workers,
            )
        if not self.cfg.train.fine_tune:
            mt = self._train_role("mt", augmented.examples)
        else:
            mt = self._train_role("mt")
            with self._stage("train:mt-finetune"):
                corpus = encode_examples(augmented.examples, mt.output_vocab, mt.input_vocab)
                dev = encode_examples(self.data.splits["dev"], mt.output_vocab, mt.input_vocab)
                self._fit(mt, corpus, dev, self._train_cfg("mt"), tag="-finetune")
        self._oracle_and_asr_rows(asr, mt)

    def _emb_avg(self) -> None:
        asr, mt = self._train_role("asr"), self._train_role("mt")
        self._oracle_and_asr_rows(asr, mt)


def run_experiment(
    cfg: ExperimentConfig,
    results_dir: Optional[Union[str, Path]] = None,
    workers: int = 1,
) -> List[Dict]:
    """
    Run one experiment and append its rows to ``results_dir/results.jsonl``

    Args:
        cfg: Experiment configuration
        results_dir: Where rows and run artifacts go; None keeps everything in memory
        workers: Decoding threads

    Returns:
        List of result rows, one per (system, split)

    Raises:
        StageError: naming the stage that failed, after the partial rows were written
    """
    return ExperimentRunner(cfg, results_dir, workers).run()
