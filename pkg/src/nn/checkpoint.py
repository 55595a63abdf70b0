"""
Checkpoint directories.

Layout::

    params.json        ordered [{"name", "shape", "values"}] in row-major order
    model_config.json  ModelConfig fields
    vocab.json         {"names": [...]}
    meta.json          seed, L_max, method label, dtype
    spe.csv            node,kind,c1..ck (structural models only)
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from ..collectors.event_log import Vocabulary
from ..collectors.ontology import NodeEmbeddingTable
from ..utils.errors import FormatError
from ..utils.logger import setup_logger
from .core import Parameter
from .model import ModelConfig, ModelParams, NextActivityTransformer
from .pos_encoding import PEMode, SpeContext

logger = setup_logger(__name__)

PathLike = Union[str, Path]


def params_to_records(params: ModelParams) -> List[Dict]:
    return [
        {
            "name": p.name,
            "shape": list(p.shape),
            "values": [float(v) for v in p.value.ravel()],
        }
        for p in params
    ]


def params_from_records(records: List[Dict], dtype=np.float32) -> ModelParams:
    params = []
    for record in records:
        try:
            value = np.asarray(record["values"], dtype=dtype).reshape(record["shape"])
        except (KeyError, ValueError) as e:
            raise FormatError(f"Malformed parameter record: {e}") from e
        params.append(Parameter(record["name"], value))
    return ModelParams(params)


def _dump(data, path: Path) -> None:
    path.write_text(json.dumps(data, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


@dataclass
class Checkpoint:
    """Everything needed to rebuild a trained model."""
    model_config: ModelConfig
    params: ModelParams
    vocab: Vocabulary
    l_max: int
    seed: int
    spe_table: Optional[NodeEmbeddingTable] = None
    meta: Dict = field(default_factory=dict)

    def build_model(self) -> NextActivityTransformer:
        spe = None
        if self.model_config.pe_mode is PEMode.STRUCTURAL:
            if self.spe_table is None:
                raise FormatError("Structural checkpoint has no ontology embedding table")
            spe = SpeContext(self.spe_table, self.vocab)
        return NextActivityTransformer(self.model_config, self.params, spe)


def save_checkpoint(checkpoint: Checkpoint, directory: PathLike) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _dump(params_to_records(checkpoint.params), directory / "params.json")
    _dump(checkpoint.model_config.to_dict(), directory / "model_config.json")
    checkpoint.vocab.save(directory / "vocab.json")
    meta = dict(checkpoint.meta)
    meta.update({
        "l_max": checkpoint.l_max,
        "seed": checkpoint.seed,
        "dtype": np.dtype(next(iter(checkpoint.params)).value.dtype).name,
    })
    _dump(meta, directory / "meta.json")
    if checkpoint.spe_table is not None:
        checkpoint.spe_table.to_csv(directory / "spe.csv")
    logger.info(f"Saved checkpoint to {directory}")
    return directory


def load_checkpoint(directory: PathLike) -> Checkpoint:
    directory = Path(directory)
    if not (directory / "params.json").is_file():
        raise FileNotFoundError(f"No checkpoint found in {directory}")

    meta = json.loads((directory / "meta.json").read_text(encoding="utf-8"))
    records = json.loads((directory / "params.json").read_text(encoding="utf-8"))
    model_config = ModelConfig.from_dict(
        json.loads((directory / "model_config.json").read_text(encoding="utf-8"))
    )
    spe_path = directory / "spe.csv"
    checkpoint = Checkpoint(
        model_config=model_config,
        params=params_from_records(records, dtype=meta.get("dtype", "float32")),
        vocab=Vocabulary.load(directory / "vocab.json"),
        l_max=int(meta["l_max"]),
        seed=int(meta["seed"]),
        spe_table=NodeEmbeddingTable.from_csv(spe_path) if spe_path.is_file() else None,
        meta={k: v for k, v in meta.items() if k not in ("l_max", "seed", "dtype")},
    )
    logger.info(f"Loaded checkpoint from {directory}", parameters=checkpoint.params.count())
    return checkpoint
