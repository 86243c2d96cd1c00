from typing import Dict, Optional


class CanNavError(Exception):
    """Base error carrying a stable error code and a readable message."""

    error_code: str = "INTERNAL_ERROR"
    exit_code: int = 1

    def __init__(self, message: str, error_code: Optional[str] = None):
        super().__init__(message)
        self.message = message
        if error_code:
            self.error_code = error_code

    def to_dict(self) -> Dict[str, str]:
        return {"error_code": self.error_code, "message": self.message}


# Usage / configuration (exit 2)

class ConfigError(CanNavError):
    error_code = "CONFIG_INVALID"
    exit_code = 2


class UsageError(CanNavError):
    error_code = "USAGE_ERROR"
    exit_code = 2


# Numeric core

class DimensionError(CanNavError):
    error_code = "DIMENSION_MISMATCH"


class ConfigurationError(CanNavError):
    error_code = "MODEL_CONFIGURATION"


class NonFiniteError(CanNavError):
    error_code = "NON_FINITE"


class ContractError(CanNavError):
    error_code = "CONTRACT_VIOLATION"


class VocabularyError(CanNavError):
    error_code = "OUT_OF_VOCABULARY"


class CheckpointError(CanNavError):
    error_code = "CHECKPOINT_INVALID"


# Environment

class GenerationError(CanNavError):
    error_code = "WORLD_GENERATION_FAILED"

    def __init__(self, message: str, seed: int):
        super().__init__(f"{message} (seed={seed})")
        self.seed = seed


class EnvironmentStepError(CanNavError):
    error_code = "ENV_STEP_FAILED"


class OracleError(CanNavError):
    error_code = "ORACLE_UNREACHABLE"


# Training / evaluation

class EmptyBatchError(CanNavError):
    error_code = "EMPTY_BATCH"


class SeedOverlapError(CanNavError):
    error_code = "SEED_OVERLAP"


# Artifacts

class ArtifactError(CanNavError):
    error_code = "ARTIFACT_WRITE_FAILED"


class OutputLockedError(CanNavError):
    error_code = "OUTPUT_LOCKED"
