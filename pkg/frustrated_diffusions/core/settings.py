# frustrated_diffusions/core/settings.py
from pydantic import AliasChoices, Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", extra="ignore", case_sensitive=False)

    # --- outputs ---
    output_root: str = Field(
        "runs",
        validation_alias=AliasChoices("FD_OUTPUT_ROOT", "output_root"),
    )

    # --- execution ---
    threads: int = Field(
        1,
        ge=1,
        validation_alias=AliasChoices("FD_THREADS", "threads"),
    )
    log_level: str = Field(
        "INFO",
        validation_alias=AliasChoices("FD_LOG_LEVEL", "log_level"),
    )

    # --- numerics ---
    picard_max_iter: int = Field(
        500,
        ge=1,
        validation_alias=AliasChoices("FD_PICARD_MAX_ITER", "picard_max_iter"),
    )


settings = Settings()
