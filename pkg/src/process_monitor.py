"""
Main module wiring ingestion, ontology embeddings, training, evaluation and
reporting into the operations exposed by the command line.
"""

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .analyzers.evaluation import EvalReport, accuracy_at_k
from .collectors.event_log import (
    EncodedTrace,
    Trace,
    TraceStatistics,
    Vocabulary,
    build_vocabulary,
    dataset_stats,
    encode_traces,
    longest_l_max,
    parse_event_log,
    split_dataset,
    write_event_log,
)
from .collectors.ontology import NodeEmbeddingTable, OntologyGraph, embed_ontology, parse_ontology
from .nn.checkpoint import load_checkpoint
from .nn.model import ModelConfig
from .nn.pos_encoding import PEMode
from .reporters.report_generator import ReportGenerator
from .synthetic.generator import gen_ontology, gen_traces
from .training.search import SearchResult, Trial, random_search
from .training.trainer import RunSummary, Trainer, run_many
from .utils.config_manager import ConfigManager
from .utils.errors import CompatibilityError, DivergenceError
from .utils.logger import setup_logger

EVAL_SPLITS = ("all", "test")


@dataclass
class Corpus:
    """An ingested event log, its vocabulary and its encoded traces."""
    traces: List[Trace]
    vocab: Vocabulary
    encoded: List[EncodedTrace]

    @property
    def l_max(self) -> int:
        return self.encoded[0].l_max


@dataclass
class ExperimentRow:
    method: str
    model_size: int
    summary: RunSummary
    checkpoint: Path


class ProcessMonitor:
    """Runs the next-activity prediction workflow from one configuration."""

    def __init__(self, config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None):
        """
        Initialize the workflow.

        Args:
            config_path: Path to configuration file
            overrides: Values taking precedence over file and environment (CLI flags)
        """
        self.logger = setup_logger(__name__)
        self.config_manager = ConfigManager(config_path)
        if overrides:
            self.config_manager.update_config(overrides)
        self.config = self.config_manager.get_config()
        self.reporter = ReportGenerator()
        self._tables: Dict[Tuple[str, int], NodeEmbeddingTable] = {}

    @property
    def output_dir(self) -> Path:
        return Path(self.config["output_dir"])

    def load_corpus(self, log_path: Optional[str] = None) -> Corpus:
        traces = parse_event_log(log_path or self.config["event_log"], self.config_manager.csv_descriptor())
        vocab = build_vocabulary(traces)
        encoded = encode_traces(traces, vocab, longest_l_max(traces))
        return Corpus(traces, vocab, encoded)

    def load_ontology(self, ontology_path: Optional[str] = None) -> OntologyGraph:
        return parse_ontology(ontology_path or self.config["ontology"])

    def embedding_table(self, k: int, ontology_path: Optional[str] = None) -> NodeEmbeddingTable:
        path = ontology_path or self.config["ontology"]
        key = (str(path), k)
        if key not in self._tables:
            self._tables[key] = embed_ontology(self.load_ontology(path), k)
        return self._tables[key]

    def synth(self) -> Tuple[Path, Path, TraceStatistics]:
        """Write a synthetic event log and ontology into the output directory."""
        synth_config = self.config_manager.synth_config()
        graph = gen_ontology(synth_config)
        traces = gen_traces(synth_config, graph)

        self.output_dir.mkdir(parents=True, exist_ok=True)
        log_path = self.output_dir / "event_log.csv"
        ontology_path = self.output_dir / "ontology.json"
        write_event_log(traces, log_path, self.config_manager.csv_descriptor())
        graph.save(ontology_path)
        self.logger.info("Synthetic corpus written", event_log=str(log_path), ontology=str(ontology_path))
        return log_path, ontology_path, dataset_stats(traces)

    def stats(self, log_path: Optional[str] = None) -> TraceStatistics:
        traces = parse_event_log(log_path or self.config["event_log"], self.config_manager.csv_descriptor())
        return dataset_stats(traces)

    def train(
        self,
        methods: Optional[Sequence[str]] = None,
        sizes: Optional[Sequence[int]] = None,
        log_path: Optional[str] = None,
    ) -> List[ExperimentRow]:
        """
        Run the repeated-fit protocol for every (method, model size) pair.

        Writes per-fit metrics JSON, the best checkpoint of every pair, and the
        long and wide result tables.
        """
        modes = [PEMode.parse(m) for m in (methods or [self.config["pe"]])]
        sizes = [int(s) for s in (sizes or [self.config["d_model"]])]
        corpus = self.load_corpus(log_path)
        train_config = self.config_manager.train_config()
        n_fits = int(self.config["n_fits"])

        rows: List[ExperimentRow] = []
        for mode in modes:
            table = self.embedding_table(int(self.config["spe_k"])) if mode is PEMode.STRUCTURAL else None
            for size in sizes:
                model_config = self.config_manager.model_config(corpus.vocab.size, pe=mode, d_model=size)
                summary = run_many(
                    n_fits, corpus.encoded, model_config, train_config, corpus.vocab,
                    table, workers=int(self.config["workers"]),
                )
                tag = f"{mode.label.lower()}_{size}"
                for index, metrics in enumerate(summary.metrics()):
                    self.reporter.save_report(
                        self.reporter.fit_metrics_json(metrics),
                        str(self.output_dir / "metrics" / tag / f"fit_{index:02d}.json"),
                    )
                trainer = Trainer(model_config, train_config, corpus.vocab, table)
                checkpoint = trainer.save(summary.best, corpus.l_max, self.output_dir / "checkpoints" / tag)
                rows.append(ExperimentRow(mode.label, size, summary, checkpoint))

        entries = [(row.method, row.model_size, row.summary.aggregate) for row in rows]
        self.reporter.save_frame(self.reporter.results_frame(entries), str(self.output_dir / "results.csv"))
        self.reporter.save_frame(self.reporter.table_frame(entries), str(self.output_dir / "results_table.csv"))
        return rows

    def evaluate(self, checkpoint_dir: str, log_path: Optional[str] = None, split: str = "all") -> EvalReport:
        """
        Score a checkpoint on an event log.

        With split="test" the log is split with the checkpoint's seed and only
        the test part is scored, which reproduces the training-time test metrics
        when the log is the one the checkpoint was trained on.
        """
        checkpoint = load_checkpoint(checkpoint_dir)
        traces = parse_event_log(log_path or self.config["event_log"], self.config_manager.csv_descriptor())
        unknown = sorted({a for t in traces for a in t.activities} - set(checkpoint.vocab.activity_names))
        if unknown:
            raise CompatibilityError(
                f"Event log has {len(unknown)} activities unknown to the checkpoint: {unknown[:10]}"
            )
        encoded = encode_traces(traces, checkpoint.vocab, checkpoint.l_max)
        dataset = split_dataset(encoded, checkpoint.seed).test if split == "test" else encoded

        report = accuracy_at_k(checkpoint.build_model(), dataset, self.config["ks"])
        self.reporter.save_frame(self.reporter.eval_frame(report), str(self.output_dir / "eval.csv"))
        self.reporter.save_frame(
            self.reporter.prefix_accuracy_frame(report), str(self.output_dir / "prefix_accuracy.csv")
        )
        self.logger.info("Evaluation finished", split=split, **report.as_dict())
        return report

    def tune(self, budget: Optional[int] = None, log_path: Optional[str] = None) -> SearchResult:
        """
        Random search over the hyperparameter space on one seeded split.

        Writes the trial log after every trial and the best configuration as a
        reusable config file.
        """
        budget = int(budget if budget is not None else self.config["tune_budget"])
        corpus = self.load_corpus(log_path)
        base = self.config_manager.train_config()
        split = split_dataset(corpus.encoded, base.seed)
        mode = self.config_manager.pe_mode()
        trials: List[Trial] = []
        trial_log = self.output_dir / "trials.csv"

        def objective(params: Dict[str, float]) -> Tuple[float, Dict[int, float]]:
            model_config = ModelConfig(
                vocab_size=corpus.vocab.size,
                d_model=int(params["d_model"]),
                hidden=int(params["hidden"]),
                heads=int(params["heads"]),
                layers=int(params["layers"]),
                dropout=params["dropout"],
                pe_mode=mode,
                spe_k=int(params["spe_k"]),
                ffn_in_blocks=bool(self.config["ffn_in_blocks"]),
            )
            table = self.embedding_table(model_config.spe_k) if mode is PEMode.STRUCTURAL else None
            train_config = replace(base, lr=params["lr"], gamma=params["gamma"])
            try:
                result = Trainer(model_config, train_config, corpus.vocab, table).fit(split)
            except DivergenceError as e:
                self.logger.warning(f"Trial diverged: {e}")
                return math.inf, {}
            return result.best_val_loss, result.accuracy

        def record(trial: Trial) -> None:
            trials.append(trial)
            self.reporter.save_frame(self.reporter.trial_frame(trials), str(trial_log))

        result = random_search(self.config_manager.search_space(), budget, base.seed, objective, record)
        self.config_manager.update_config(dict(result.best.params))
        self.config_manager.save_config(str(self.output_dir / "best_config.yaml"))
        return result

    def encode_graph(self, ontology_path: Optional[str] = None, k: Optional[int] = None,
                     output: Optional[str] = None) -> Tuple[NodeEmbeddingTable, Path]:
        table = embed_ontology(self.load_ontology(ontology_path), int(k or self.config["spe_k"]))
        path = Path(output) if output else self.output_dir / "embeddings.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path)
        self.logger.info(f"Embedding table saved to {path}", nodes=len(table), k=table.k)
        return table, path
