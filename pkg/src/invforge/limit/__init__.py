"""Inverse-limit construction: staged address structures with exact masses."""
from .engine import (BaseMassMeasure, LimitStage, NewElement, StageRecord, build_limit,
                     collision_probability, init_stages_01, lambda_min, limit_schedule, m_star,
                     run_stage, substage_add_mass, substage_add_witnesses, substage_duplicate,
                     substage_expand_split)
from .kernel import TypeKernel, address_type
from .oracle import materialize_stage
from .sampling import (SampledStructure, as_model_report, eta_bound, eta_report,
                       exchangeability_report, gen_log_lines, sample_invariant, verify_suite,
                       write_gen_log)

__all__ = [
    "BaseMassMeasure", "LimitStage", "NewElement", "StageRecord", "build_limit",
    "collision_probability", "init_stages_01", "lambda_min", "limit_schedule", "m_star",
    "run_stage", "substage_add_mass", "substage_add_witnesses", "substage_duplicate",
    "substage_expand_split", "TypeKernel", "address_type", "materialize_stage",
    "SampledStructure", "as_model_report", "eta_bound", "eta_report", "exchangeability_report",
    "gen_log_lines", "sample_invariant", "verify_suite", "write_gen_log",
]
