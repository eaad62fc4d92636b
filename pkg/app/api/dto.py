from typing import List, Optional

from pydantic import BaseModel


class SceneBoxOut(BaseModel):
    lo: List[float]
    hi: List[float]


class CheckpointOut(BaseModel):
    format_version: int
    iteration: int
    fields: dict
    camera: dict
    scene_box: SceneBoxOut
    config: Optional[dict] = None
