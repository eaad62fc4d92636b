from typing import Protocol

from app.domain.types import RawVideo


class DatasetStorePort(Protocol):
    """
    Persistence of raw clips (frames, masks, relative depth, intrinsics).
    `write` followed by `read` must return the same clip.
    """

    def read(self, location: str) -> RawVideo:
        pass

    def write(self, location: str, video: RawVideo) -> None:
        pass
