"""
Event log ingestion: CSV parsing, activity vocabulary, fixed-length trace
encoding, dataset splits and trace length statistics.
"""

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..utils.errors import (
    DataError,
    EmptyLogError,
    FormatError,
    LengthError,
    SplitError,
    VocabularyError,
)
from ..utils.logger import setup_logger

logger = setup_logger(__name__)

PAD = 0
SOS = 1
EOS = 2
SPECIAL_TOKENS = ("<pad>", "<sos>", "<eos>")
N_SPECIAL = len(SPECIAL_TOKENS)

PathLike = Union[str, Path]


@dataclass(frozen=True)
class CsvDescriptor:
    """Column mapping for event-log CSV files."""
    case_column: str = "case_id"
    activity_column: str = "activity"
    order_column: str = "event_index"

    @property
    def columns(self) -> Tuple[str, str, str]:
        return (self.case_column, self.activity_column, self.order_column)


@dataclass(frozen=True)
class Trace:
    """Ordered activities executed for one case."""
    case_id: str
    activities: Tuple[str, ...]

    def __post_init__(self):
        if not self.activities:
            raise DataError(f"Trace {self.case_id!r} has no activities")
        object.__setattr__(self, "activities", tuple(self.activities))

    def __len__(self) -> int:
        return len(self.activities)


@dataclass(frozen=True)
class EncodedTrace:
    """Fixed-length id sequence: SOS, activity ids, EOS, then PAD."""
    ids: Tuple[int, ...]
    true_length: int
    case_id: str = ""

    @property
    def l_max(self) -> int:
        return len(self.ids)

    @property
    def n_activities(self) -> int:
        return self.true_length - 2

    def as_array(self) -> np.ndarray:
        return np.asarray(self.ids, dtype=np.int64)


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint train/validation/test partition of encoded traces."""
    train: Tuple[EncodedTrace, ...]
    validation: Tuple[EncodedTrace, ...]
    test: Tuple[EncodedTrace, ...]
    seed: int

    def sizes(self) -> Tuple[int, int, int]:
        return (len(self.train), len(self.validation), len(self.test))


@dataclass(frozen=True)
class TraceStatistics:
    """Trace length statistics, lengths counted in activities."""
    n_traces: int
    n_events: int
    n_activities: int
    mean: float
    std: float
    min: int
    max: int
    histogram: Dict[int, int] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, float]:
        return {
            "traces": self.n_traces,
            "events": self.n_events,
            "activities": self.n_activities,
            "mean": self.mean,
            "std": self.std,
            "min": self.min,
            "max": self.max,
        }


class Vocabulary:
    """Bidirectional map between activity names and token ids.

    Ids 0, 1 and 2 are reserved for PAD, SOS and EOS; activities start at 3.
    """

    def __init__(self, names: Sequence[str]):
        names = list(names)
        duplicates = [name for name, count in Counter(names).items() if count > 1]
        if duplicates:
            raise VocabularyError(f"Duplicate activity names in vocabulary: {duplicates}")
        self.id_to_name: List[str] = list(SPECIAL_TOKENS) + names
        self.name_to_id: Dict[str, int] = {
            name: index + N_SPECIAL for index, name in enumerate(names)
        }

    @property
    def size(self) -> int:
        return len(self.id_to_name)

    @property
    def activity_names(self) -> List[str]:
        return self.id_to_name[N_SPECIAL:]

    def __len__(self) -> int:
        return self.size

    def __contains__(self, name: object) -> bool:
        return name in self.name_to_id

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.activity_names == other.activity_names

    def __repr__(self) -> str:
        return f"Vocabulary(size={self.size})"

    def id_of(self, name: str) -> int:
        try:
            return self.name_to_id[name]
        except KeyError:
            raise VocabularyError(f"Unknown activity: {name!r}") from None

    @staticmethod
    def is_special(token_id: int) -> bool:
        return 0 <= token_id < N_SPECIAL

    def decode(self, ids: Iterable[int]) -> List[str]:
        """Map ids back to activity names, dropping special tokens."""
        return [self.id_to_name[int(i)] for i in ids if not self.is_special(int(i))]

    def to_dict(self) -> Dict[str, List[str]]:
        return {"names": self.activity_names}

    @classmethod
    def from_dict(cls, data: Mapping[str, Sequence[str]]) -> "Vocabulary":
        if "names" not in data:
            raise FormatError("Vocabulary document must contain 'names'")
        return cls(data["names"])

    def save(self, path: PathLike) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path: PathLike) -> "Vocabulary":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _order_key(column: pd.Series, name: str) -> pd.Series:
    """Turn the order column into a sortable key: numeric first, then timestamps."""
    try:
        return pd.to_numeric(column, errors="raise")
    except (ValueError, TypeError):
        pass
    try:
        return pd.to_datetime(column, errors="raise", utc=True)
    except (ValueError, TypeError) as e:
        raise FormatError(
            f"Order column {name!r} is neither numeric nor a timestamp: {e}"
        ) from e


def parse_event_log(path: PathLike, descriptor: Optional[CsvDescriptor] = None) -> List[Trace]:
    """
    Parse an event-log CSV into traces.

    Args:
        path: CSV file with a header row
        descriptor: Names of the case, activity and order columns

    Returns:
        One trace per case, in order of first appearance in the file, with
        activities sorted by the order column (ties keep file order)
    """
    descriptor = descriptor or CsvDescriptor()
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise EmptyLogError(f"Event log {path} is empty") from None
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise FormatError(f"Event log {path} is not a readable UTF-8 CSV: {e}") from e

    missing = [c for c in descriptor.columns if c not in frame.columns]
    if missing:
        raise FormatError(f"Event log {path} is missing columns: {missing}")
    if frame.empty:
        raise EmptyLogError(f"Event log {path} has a header but no events")

    case_col, activity_col, order_col = descriptor.columns
    case_order = pd.unique(frame[case_col])
    frame = frame.assign(
        _key=_order_key(frame[order_col], order_col),
        _row=np.arange(len(frame)),
    ).sort_values(["_key", "_row"], kind="mergesort")

    grouped = {
        case: tuple(group[activity_col])
        for case, group in frame.groupby(case_col, sort=False)
    }
    traces = [Trace(str(case), grouped[case]) for case in case_order]
    logger.info(f"Parsed {len(frame)} events into {len(traces)} traces from {path}")
    return traces


def write_event_log(
    traces: Sequence[Trace],
    path: PathLike,
    descriptor: Optional[CsvDescriptor] = None,
) -> None:
    """Write traces in the CSV layout read by parse_event_log."""
    descriptor = descriptor or CsvDescriptor()
    rows = [
        (trace.case_id, activity, position)
        for trace in traces
        for position, activity in enumerate(trace.activities, start=1)
    ]
    frame = pd.DataFrame(rows, columns=list(descriptor.columns))
    frame.to_csv(path, index=False, lineterminator="\n")


def build_vocabulary(traces: Sequence[Trace]) -> Vocabulary:
    """Assign ids to activities in first-occurrence order."""
    if not traces:
        raise EmptyLogError("Cannot build a vocabulary from zero traces")
    names = list(dict.fromkeys(a for trace in traces for a in trace.activities))
    vocab = Vocabulary(names)
    logger.info(f"Built vocabulary with {len(names)} activities", size=vocab.size)
    return vocab


def longest_l_max(traces: Sequence[Trace]) -> int:
    """Default encoded length: longest trace plus SOS and EOS."""
    return max(len(trace) for trace in traces) + 2


def encode_trace(trace: Trace, vocab: Vocabulary, l_max: int) -> EncodedTrace:
    """Encode one trace as [SOS, ids..., EOS, PAD...] of length l_max."""
    true_length = len(trace) + 2
    if true_length > l_max:
        raise LengthError(
            f"Trace {trace.case_id!r} has {len(trace)} activities; "
            f"at most {l_max - 2} fit in length {l_max}"
        )
    ids = [SOS] + [vocab.id_of(a) for a in trace.activities] + [EOS]
    ids += [PAD] * (l_max - true_length)
    return EncodedTrace(tuple(ids), true_length, trace.case_id)


def encode_traces(traces: Sequence[Trace], vocab: Vocabulary, l_max: int) -> List[EncodedTrace]:
    return [encode_trace(trace, vocab, l_max) for trace in traces]


def split_dataset(traces: Sequence[EncodedTrace], seed: int) -> DatasetSplit:
    """Seeded shuffle followed by an 80/10/10 partition (remainder goes to train)."""
    n = len(traces)
    if n < 10:
        raise SplitError(f"Need at least 10 traces to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_val = n // 10
    n_test = n // 10
    n_train = n - n_val - n_test
    shuffled = [traces[i] for i in order]
    return DatasetSplit(
        train=tuple(shuffled[:n_train]),
        validation=tuple(shuffled[n_train:n_train + n_val]),
        test=tuple(shuffled[n_train + n_val:]),
        seed=seed,
    )


def dataset_stats(traces: Sequence[Trace]) -> TraceStatistics:
    """Mean, population standard deviation, min and max of trace lengths."""
    if not traces:
        raise EmptyLogError("Cannot compute statistics over zero traces")
    lengths = np.array([len(trace) for trace in traces])
    histogram = dict(sorted(Counter(lengths.tolist()).items()))
    return TraceStatistics(
        n_traces=len(traces),
        n_events=int(lengths.sum()),
        n_activities=len({a for trace in traces for a in trace.activities}),
        mean=float(lengths.mean()),
        std=float(lengths.std()),
        min=int(lengths.min()),
        max=int(lengths.max()),
        histogram=histogram,
    )
