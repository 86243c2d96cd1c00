from pydantic_settings import BaseSettings

from cannav import __version__


class Settings(BaseSettings):
    # Logging
    log_level: str = "INFO"

    # Artifacts
    output_root: str = "runs"
    record_wall_time: bool = False
    code_version: str = __version__

    # Numerics
    float_dtype: str = "float64"

    # Evaluation fan-out
    eval_workers: int = 1

    class Config:
        env_file = ".env"
        env_prefix = "CANNAV_"
        case_sensitive = False


settings = Settings()
