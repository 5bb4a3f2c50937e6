"""Adaptive autoencoder for relation resolution in knowledge graphs."""

from ._vcoder import (
    Triple,
    TripleStore,
    TrainConfig,
    Trainer,
    VCoderError,
    VCoderModel,
    assign_units,
    binary_encoding,
    create_model,
    disclosure_report,
    epsilon_at,
    from_triples,
    linkpred,
    load_id_format,
    load_tsv,
    merge_relations,
    parse_config,
    recovery_experiment,
    triple_input,
)

__all__ = [
    "Triple",
    "TripleStore",
    "TrainConfig",
    "Trainer",
    "VCoderError",
    "VCoderModel",
    "assign_units",
    "binary_encoding",
    "create_model",
    "disclosure_report",
    "epsilon_at",
    "from_triples",
    "linkpred",
    "load_id_format",
    "load_tsv",
    "merge_relations",
    "parse_config",
    "recovery_experiment",
    "triple_input",
]
