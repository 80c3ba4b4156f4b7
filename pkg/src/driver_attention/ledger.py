"""Warnings ledger: reason-coded records plus per-stage frame accounting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LedgerEntry:
    stage: str
    code: str
    detail: str = ""
    t: float | None = None

    def to_dict(self) -> dict:
        d = {"stage": self.stage, "code": self.code, "detail": self.detail}
        if self.t is not None:
            d["t"] = self.t
        return d


@dataclass
class StageCount:
    frames_in: int = 0
    frames_used: int = 0
    frames_dropped: int = 0

    def balanced(self) -> bool:
        return self.frames_in == self.frames_used + self.frames_dropped


@dataclass
class Ledger:
    entries: list[LedgerEntry] = field(default_factory=list)
    counts: dict[str, StageCount] = field(default_factory=dict)

    def warn(self, stage: str, code: str, detail: str = "", t: float | None = None) -> None:
        entry = LedgerEntry(stage, code, detail, t)
        self.entries.append(entry)
        log.debug("%s/%s %s", stage, code, detail)

    def count(self, stage: str, *, used: int = 0, dropped: int = 0) -> None:
        c = self.counts.setdefault(stage, StageCount())
        c.frames_in += used + dropped
        c.frames_used += used
        c.frames_dropped += dropped

    def codes(self, stage: str | None = None) -> list[str]:
        return [e.code for e in self.entries if stage is None or e.stage == stage]

    def __len__(self) -> int:
        return len(self.entries)

    def to_dict(self) -> dict:
        return {
            "entries": [e.to_dict() for e in self.entries],
            "accounting": {
                stage: {
                    "frames_in": c.frames_in,
                    "frames_used": c.frames_used,
                    "frames_dropped": c.frames_dropped,
                }
                for stage, c in sorted(self.counts.items())
            },
        }
