"""Secure distributed matrix multiplication: encoders, retrieval sessions,
capacity evaluators and verification tools over prime fields."""
from .field import PrimeField, build_mult_isomorphism, solve_linear_system, smallest_prime_above
from .sharing import ConfigError, SdmmConfig, SecretBatch, NoiseBatch
from .schemes import (csa_scheme_session, general_scheme_session, hadamard_session, outer_product_session,
                      oneshot_partition_session, pir_reduction_demo, run_session, scalar_mul_session)
from .capacity import sdmm_capacity, mm_xstpir_upper_bound, product_entropy_formula, achieved_rate

__all__ = [
    "PrimeField", "build_mult_isomorphism", "solve_linear_system", "smallest_prime_above",
    "ConfigError", "SdmmConfig", "SecretBatch", "NoiseBatch",
    "csa_scheme_session", "general_scheme_session", "hadamard_session", "outer_product_session",
    "oneshot_partition_session", "pir_reduction_demo", "run_session", "scalar_mul_session",
    "sdmm_capacity", "mm_xstpir_upper_bound", "product_entropy_formula", "achieved_rate",
]
