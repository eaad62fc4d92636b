from typing import List, Optional

from pydantic import BaseModel, Field

from app.domain.enums import RenderKind


class RenderIn(BaseModel):
    time: float
    # yaw, pitch, roll in degrees, then tx, ty, tz in scene units
    pose: Optional[List[float]] = Field(default=None, min_length=6, max_length=6)
    stride: int = Field(default=1, ge=1)
    kind: RenderKind = RenderKind.COLOR
