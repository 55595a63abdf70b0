from .generator import SynthConfig, gen_ontology, gen_traces

__all__ = ["SynthConfig", "gen_ontology", "gen_traces"]
