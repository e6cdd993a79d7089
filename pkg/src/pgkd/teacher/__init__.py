"""Teacher side: prompts, backends, response parsing and generation."""

from .backends import (
    Completion,
    ConstantBackend,
    HTTPChatBackend,
    HTTPConfig,
    MockOracleBackend,
    OracleClassifierBackend,
    RecordingBackend,
    TeacherBackend,
    allocate,
    count_tokens,
)
from .generation import generate, parse_zero_shot_response, stratified_subset, zero_shot_classify
from .parsing import GenerationBatch, RejectReason, Rejection, extract_payload, parse_generation
from .prompts import (
    DEFAULT_GEN_BATCH_SIZE,
    DEFAULT_SUBSET_SIZE,
    PromptContext,
    build_pgkd_prompt,
    build_zero_shot_prompt,
)

__all__ = [
    "Completion",
    "ConstantBackend",
    "DEFAULT_GEN_BATCH_SIZE",
    "DEFAULT_SUBSET_SIZE",
    "GenerationBatch",
    "HTTPChatBackend",
    "HTTPConfig",
    "MockOracleBackend",
    "OracleClassifierBackend",
    "PromptContext",
    "RecordingBackend",
    "RejectReason",
    "Rejection",
    "TeacherBackend",
    "allocate",
    "build_pgkd_prompt",
    "build_zero_shot_prompt",
    "count_tokens",
    "extract_payload",
    "generate",
    "parse_generation",
    "parse_zero_shot_response",
    "stratified_subset",
    "zero_shot_classify",
]
