from typing import Protocol

from app.domain.types import LossReport


class TrainingLogPort(Protocol):
    def append(self, iteration: int, report: LossReport) -> None:
        pass

    def truncate_after(self, iteration: int) -> None:
        """Drop entries past `iteration`, used when resuming a run."""
        pass
