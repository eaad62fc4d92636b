from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Numerics
    DETERMINISTIC: bool = Field(default=False)
    DEVICE: Optional[str] = None

    # Render service
    CHECKPOINT_PATH: Optional[str] = None
    RENDER_CHUNK: int = Field(default=4096, gt=0)
    RENDER_SAMPLES: int = Field(default=128, ge=2)
    HOLDOUT_EVERY: int = Field(default=8, ge=2)
    PORT: int = 8000

    LOG_CONFIG: str = 'logging.ini'

    class Config:
        env_file = '.env'

    @field_validator('DEVICE', mode='before')
    def allow_blank_device(cls, v):
        if v == '' or v is None:
            return None
        return v

    @field_validator('CHECKPOINT_PATH', mode='before')
    def allow_blank_checkpoint(cls, v):
        if v == '' or v is None:
            return None
        return v


settings = Settings()
