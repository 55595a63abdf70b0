"""
Training loop: masked next-token cross-entropy, AdamW, per-epoch step decay,
early stopping on validation loss, and seeded repeated fits.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..analyzers.evaluation import DEFAULT_KS, AggregateReport, EvalReport, accuracy_at_k, aggregate_runs
from ..collectors.event_log import DatasetSplit, EncodedTrace, Vocabulary, split_dataset
from ..collectors.ontology import NodeEmbeddingTable
from ..nn.batching import make_batch
from ..nn.checkpoint import Checkpoint, save_checkpoint
from ..nn.core import check_finite, cross_entropy_masked
from ..nn.model import ModelConfig, ModelParams, NextActivityTransformer, init_params
from ..nn.pos_encoding import PEMode, SpeContext
from ..utils.errors import ConfigurationError, DataError, DivergenceError, ParameterError
from ..utils.logger import bind_fit, setup_logger
from .optim import AdamW, AdamWHyper, step_lr

PathLike = Union[str, Path]


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer, schedule and stopping hyperparameters."""
    lr: float = 0.002836
    gamma: float = 0.989695
    step_epochs: int = 1
    weight_decay: float = 0.01
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    epochs: int = 100
    batch_size: int = 32
    patience: int = 10
    seed: int = 0
    ks: Tuple[int, ...] = DEFAULT_KS

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(self.betas))
        object.__setattr__(self, "ks", tuple(self.ks))
        if self.lr <= 0:
            raise ConfigurationError(f"Learning rate must be positive, got {self.lr}")
        if not 0 < self.gamma <= 1:
            raise ConfigurationError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.patience < 1:
            raise ConfigurationError(f"patience must be at least 1, got {self.patience}")
        if self.epochs < 1 or self.batch_size < 1 or self.step_epochs < 1:
            raise ConfigurationError("epochs, batch_size and step_epochs must be positive")
        if not all(0 <= b < 1 for b in self.betas) or self.eps <= 0 or self.weight_decay < 0:
            raise ConfigurationError("Invalid AdamW betas, eps or weight decay")

    @property
    def adamw(self) -> AdamWHyper:
        return AdamWHyper(self.betas, self.eps, self.weight_decay)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["betas"] = list(self.betas)
        data["ks"] = list(self.ks)
        return data


@dataclass
class FitResult:
    """Outcome of one fit, with test metrics computed from the best-validation parameters."""
    seed: int
    best_val_loss: float
    best_epoch: int
    epochs_run: int
    test_report: EvalReport
    initial_val_loss: float
    train_losses: List[float] = field(default_factory=list)
    val_losses: List[float] = field(default_factory=list)
    checkpoint_path: Optional[str] = None
    params: Optional[ModelParams] = field(default=None, repr=False)

    @property
    def accuracy(self) -> Dict[int, float]:
        return self.test_report.accuracy

    def metrics(self, fit_index: int) -> Dict:
        data = {"fit": fit_index, "seed": self.seed, "val_loss": self.best_val_loss}
        data.update(self.test_report.as_dict())
        return data


class Trainer:
    """Fits one model configuration on a dataset split."""

    def __init__(
        self,
        model_config: ModelConfig,
        train_config: TrainConfig,
        vocab: Vocabulary,
        spe_table: Optional[NodeEmbeddingTable] = None,
    ):
        self.logger = setup_logger(__name__)
        self.model_config = model_config
        self.train_config = train_config
        self.vocab = vocab
        self.spe_table = spe_table
        if model_config.vocab_size != vocab.size:
            raise ConfigurationError(
                f"Model vocabulary size {model_config.vocab_size} does not match {vocab.size}"
            )
        if model_config.pe_mode is PEMode.STRUCTURAL and spe_table is None:
            raise ConfigurationError("Structural encoding needs an ontology embedding table")

    def build_model(self, seed: int) -> NextActivityTransformer:
        params = init_params(self.model_config, seed)
        spe = None
        if self.model_config.pe_mode is PEMode.STRUCTURAL:
            spe = SpeContext(self.spe_table, self.vocab)
        return NextActivityTransformer(self.model_config, params, spe)

    def validation_loss(self, model: NextActivityTransformer, traces: Sequence[EncodedTrace]) -> float:
        """Mean masked cross-entropy over every valid position, inference mode."""
        total, count = 0.0, 0
        size = self.train_config.batch_size
        for start in range(0, len(traces), size):
            batch = make_batch(traces[start:start + size])
            result = cross_entropy_masked(model.logits(batch.inputs), batch.targets)
            total += result.loss * result.count
            count += result.count
        return total / count if count else 0.0

    def _train_epoch(
        self,
        model: NextActivityTransformer,
        optimizer: AdamW,
        traces: Sequence[EncodedTrace],
        lr: float,
        shuffle_rng: np.random.Generator,
        dropout_rng: np.random.Generator,
        epoch: int,
    ) -> float:
        size = self.train_config.batch_size
        order = shuffle_rng.permutation(len(traces))
        total, count = 0.0, 0
        for batch_index, start in enumerate(range(0, len(traces), size)):
            batch = make_batch([traces[i] for i in order[start:start + size]])
            optimizer.zero_grad()
            logits = model.forward(batch.inputs, training=True, rng=dropout_rng)
            result = cross_entropy_masked(logits, batch.targets)
            try:
                check_finite(
                    result.loss, f"training loss at epoch {epoch}, batch {batch_index} (lr={lr:.6g})"
                )
            except DivergenceError:
                self.logger.error("Training diverged", epoch=epoch, batch=batch_index, lr=lr)
                raise
            model.backward(result.grad)
            optimizer.step(lr)
            total += result.loss * result.count
            count += result.count
        return total / count if count else 0.0

    def fit(
        self,
        split: DatasetSplit,
        seed: Optional[int] = None,
        checkpoint_dir: Optional[PathLike] = None,
    ) -> FitResult:
        """
        Train with early stopping, then score the test split with the best parameters.

        Args:
            split: Train/validation/test traces
            seed: Overrides the configured seed for initialization, shuffling and dropout
            checkpoint_dir: When set, the best parameters are saved there

        Returns:
            FitResult with the loss trajectory and test accuracy@k
        """
        config = self.train_config
        seed = config.seed if seed is None else seed
        if not split.train or not split.validation or not split.test:
            raise DataError(f"Every split must be non-empty, got sizes {split.sizes()}")

        model = self.build_model(seed)
        optimizer = AdamW(model.params, config.adamw)
        shuffle_rng = np.random.default_rng([seed, 0])
        dropout_rng = np.random.default_rng([seed, 1])

        initial = self.validation_loss(model, split.validation)
        best_loss, best_epoch, stale = math.inf, -1, 0
        best_params = model.params.snapshot()
        train_losses: List[float] = []
        val_losses: List[float] = []
        log = bind_fit(self.logger, seed, self.model_config.pe_mode.label)
        log.info(
            "Starting fit",
            parameters=model.params.count(),
            sizes=split.sizes(),
        )

        for epoch in range(config.epochs):
            lr = step_lr(config.lr, config.gamma, config.step_epochs, epoch)
            train_loss = self._train_epoch(
                model, optimizer, split.train, lr, shuffle_rng, dropout_rng, epoch
            )
            val_loss = self.validation_loss(model, split.validation)
            try:
                check_finite(val_loss, f"validation loss at epoch {epoch}")
            except DivergenceError:
                log.error("Validation loss diverged", epoch=epoch)
                raise
            train_losses.append(train_loss)
            val_losses.append(val_loss)
            log.info(
                "Epoch finished", epoch=epoch, train_loss=train_loss, val_loss=val_loss, lr=lr
            )

            if val_loss < best_loss:
                best_loss, best_epoch, stale = val_loss, epoch, 0
                best_params = model.params.snapshot()
            else:
                stale += 1
                if stale >= config.patience:
                    log.info("Early stopping", epoch=epoch, best_epoch=best_epoch)
                    break

        model.params.restore(best_params)
        report = accuracy_at_k(model, split.test, config.ks)
        result = FitResult(
            seed=seed,
            best_val_loss=best_loss,
            best_epoch=best_epoch,
            epochs_run=len(val_losses),
            test_report=report,
            initial_val_loss=initial,
            train_losses=train_losses,
            val_losses=val_losses,
            params=model.params,
        )
        if checkpoint_dir is not None:
            result.checkpoint_path = str(self.save(result, split.train[0].l_max, checkpoint_dir))
        log.info("Fit finished", val_loss=best_loss, **report.as_dict())
        return result

    def save(self, result: FitResult, l_max: int, directory: PathLike) -> Path:
        """Write the fit's best parameters as a checkpoint directory."""
        checkpoint = Checkpoint(
            model_config=self.model_config,
            params=result.params,
            vocab=self.vocab,
            l_max=l_max,
            seed=result.seed,
            spe_table=self.spe_table if self.model_config.pe_mode is PEMode.STRUCTURAL else None,
            meta={"method": self.model_config.pe_mode.label, "best_epoch": result.best_epoch},
        )
        return save_checkpoint(checkpoint, directory)


def fit(
    split: DatasetSplit,
    model_config: ModelConfig,
    train_config: TrainConfig,
    vocab: Vocabulary,
    spe_table: Optional[NodeEmbeddingTable] = None,
    checkpoint_dir: Optional[PathLike] = None,
) -> FitResult:
    return Trainer(model_config, train_config, vocab, spe_table).fit(
        split, checkpoint_dir=checkpoint_dir
    )


@dataclass
class RunSummary:
    """Repeated fits of one configuration and their aggregate test accuracy."""
    fits: List[FitResult]
    aggregate: AggregateReport

    @property
    def best(self) -> FitResult:
        return min(self.fits, key=lambda f: f.best_val_loss)

    def metrics(self) -> List[Dict]:
        return [f.metrics(i) for i, f in enumerate(self.fits)]


def _run_fit(args) -> FitResult:
    traces, model_config, train_config, vocab, spe_table, seed = args
    split = split_dataset(traces, seed)
    return Trainer(model_config, train_config, vocab, spe_table).fit(split, seed=seed)


def run_many(
    n_fits: int,
    traces: Sequence[EncodedTrace],
    model_config: ModelConfig,
    train_config: TrainConfig,
    vocab: Vocabulary,
    spe_table: Optional[NodeEmbeddingTable] = None,
    workers: int = 1,
) -> RunSummary:
    """
    Run n_fits independent fits with seeds seed, seed+1, ...

    Each seed controls its fit's split, initialization, shuffling and dropout.
    Fits may run in worker processes; results keep fit-index order.
    """
    logger = setup_logger(__name__)
    if n_fits < 1:
        raise ParameterError(f"n_fits must be at least 1, got {n_fits}")

    jobs = [
        (traces, model_config, train_config, vocab, spe_table, train_config.seed + i)
        for i in range(n_fits)
    ]
    if workers > 1 and n_fits > 1:
        with ProcessPoolExecutor(max_workers=min(workers, n_fits)) as pool:
            fits = list(pool.map(_run_fit, jobs))
    else:
        fits = [_run_fit(job) for job in jobs]

    aggregate = aggregate_runs([f.test_report for f in fits])
    logger.info(
        "Finished repeated fits",
        method=model_config.pe_mode.label,
        model_size=model_config.d_model,
        fits=n_fits,
        mean=aggregate.mean,
        std=aggregate.std,
    )
    return RunSummary(fits, aggregate)
