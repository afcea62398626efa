"""Quantized federated averaging simulator (Python bindings)."""

from ._fedq import (  # noqa: F401
    AssumptionViolation,
    ConfigError,
    __version__,
    bits_downlink,
    bits_step,
    bits_thm1,
    canonical_config,
    clamp_limit,
    dt_gain,
    gamma_of,
    grid_moments,
    lr_schedule,
    message_bits,
    quantize_pipeline,
    quantize_vector,
    round_nearest,
    round_stochastic,
    run_federation,
    verify_lemma4,
    verify_lemma5,
    verify_lemma7,
)
