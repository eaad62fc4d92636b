import json
from pathlib import Path
from typing import List

from app.domain.ports.training_log import TrainingLogPort
from app.domain.types import LossReport


def _line(iteration: int, report: LossReport) -> str:
    return json.dumps({'iteration': iteration, **report.as_dict()}) + '\n'


class NdjsonTrainingLog(TrainingLogPort):
    """One JSON object per line; keys always in the same order."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, iteration: int, report: LossReport) -> None:
        with self.path.open('a', encoding='utf-8') as fh:
            fh.write(_line(iteration, report))

    def truncate_after(self, iteration: int) -> None:
        if not self.path.exists():
            return
        kept = [
            line
            for line in self.path.read_text(encoding='utf-8').splitlines(True)
            if line.strip() and json.loads(line)['iteration'] <= iteration
        ]
        self.path.write_text(''.join(kept), encoding='utf-8')

    def entries(self) -> List[dict]:
        if not self.path.exists():
            return []
        with self.path.open(encoding='utf-8') as fh:
            return [json.loads(line) for line in fh if line.strip()]


class InMemoryTrainingLog(TrainingLogPort):
    def __init__(self):
        self.lines: List[str] = []

    def append(self, iteration: int, report: LossReport) -> None:
        self.lines.append(_line(iteration, report))

    def truncate_after(self, iteration: int) -> None:
        self.lines = [
            ln for ln in self.lines if json.loads(ln)['iteration'] <= iteration
        ]

    def entries(self) -> List[dict]:
        return [json.loads(ln) for ln in self.lines]
