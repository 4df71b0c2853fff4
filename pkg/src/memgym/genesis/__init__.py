from .personas import load_pool, normalize_record, synthetic_pool
from .pipeline import (
    DEFAULT_START_DATE,
    GenerationResult,
    VerifierOutcome,
    assemble_blueprint,
    generate_blueprint,
    generate_exposure_queries,
    generate_schema_and_questions,
    generate_variant_answers,
    materialize_options,
    plan_evolution,
    run_pipeline,
    summarize_persona,
)

__all__ = [
    "DEFAULT_START_DATE", "GenerationResult", "VerifierOutcome", "assemble_blueprint", "generate_blueprint",
    "generate_exposure_queries", "generate_schema_and_questions", "generate_variant_answers", "load_pool",
    "materialize_options", "normalize_record", "plan_evolution", "run_pipeline", "summarize_persona",
    "synthetic_pool",
]
