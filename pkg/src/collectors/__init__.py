"""
Readers for event logs and process ontologies.
"""

from .event_log import Trace, Vocabulary, build_vocabulary, encode_traces, parse_event_log, split_dataset
from .ontology import OntologyGraph, embed_ontology, parse_ontology

__all__ = [
    "OntologyGraph",
    "Trace",
    "Vocabulary",
    "build_vocabulary",
    "embed_ontology",
    "encode_traces",
    "parse_event_log",
    "parse_ontology",
    "split_dataset",
]
