"""Append-only event log: the single record of everything that happens in a run.

Every observation, order, trade, utterance, choice, and backend exchange is
appended as one EventRecord. Analytics consumes these logs and nothing else,
so any quantity a report needs must be derivable from here.

Logs serialize to JSONL with sorted keys and no wall-clock timestamps, so two
runs with the same config and seed produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

# Phase indices used in timestamps and event records.
PHASE_INIT = 0
PHASE_MARKET = 1
PHASE_DAILY = 2
PHASE_SOCIAL = 3


@dataclass
class EventRecord:
    run_id: str
    seed: int
    day: int
    phase: int
    kind: str
    payload: dict
    sequence: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "sequence": self.sequence,
                "run_id": self.run_id,
                "seed": self.seed,
                "day": self.day,
                "phase": self.phase,
                "kind": self.kind,
                "payload": self.payload,
            },
            sort_keys=True,
            ensure_ascii=False,
        )


class EventLog:
    """In-memory, append-only list of EventRecords for one run."""

    def __init__(self, run_id: str, seed: int):
        self.run_id = run_id
        self.seed = seed
        self._records: list[EventRecord] = []

    def append(self, day: int, phase: int, kind: str, payload: dict) -> EventRecord:
        rec = EventRecord(
            run_id=self.run_id,
            seed=self.seed,
            day=day,
            phase=phase,
            kind=kind,
            payload=payload,
            sequence=len(self._records),
        )
        self._records.append(rec)
        return rec

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[EventRecord]:
        return iter(self._records)

    @property
    def records(self) -> tuple[EventRecord, ...]:
        return tuple(self._records)

    def filter(self, kind: str) -> list[EventRecord]:
        return [r for r in self._records if r.kind == kind]

    def write_jsonl(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self._records:
                fh.write(rec.to_json())
                fh.write("\n")
        return path

    def to_dicts(self) -> list[dict]:
        return [json.loads(r.to_json()) for r in self._records]

    @classmethod
    def from_records(cls, run_id: str, seed: int, records: Iterable[dict]) -> "EventLog":
        log = cls(run_id, seed)
        for rec in records:
            log._records.append(
                EventRecord(
                    run_id=rec["run_id"],
                    seed=rec["seed"],
                    day=rec["day"],
                    phase=rec["phase"],
                    kind=rec["kind"],
                    payload=rec["payload"],
                    sequence=rec["sequence"],
                )
            )
        return log


def read_jsonl(path: str | Path) -> list[dict]:
    """Load one JSONL event-log file into a list of plain dicts."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def read_log_dir(path: str | Path) -> list[list[dict]]:
    """Load every per-seed log in a run directory, sorted by filename."""
    path = Path(path)
    if path.is_file():
        return [read_jsonl(path)]
    files = sorted(path.glob("*.jsonl"))
    if not files:
        raise FileNotFoundError(f"no .jsonl event logs under {path}")
    return [read_jsonl(f) for f in files]


class ConfigError(ValueError):
    """Raised for invalid configuration (bad packs, corpora, flags...)."""


class ContractViolation(AssertionError):
    """Raised when a caller violates an operation's precondition."""


class BackendError(RuntimeError):
    """Raised when the text backend fails after the configured retries."""
