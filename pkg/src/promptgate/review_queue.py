"""Persistent human-review queue.

Storage is an append-only JSONL event log (one record per enqueue/resolve);
the in-memory index is rebuilt from it at startup, so pending items survive
restarts.  Enqueue and resolve are linearizable: of two concurrent resolves
for one item exactly one wins.
"""

from __future__ import annotations

import enum
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import AlreadyResolved, NotFound


class ReviewStatus(str, enum.Enum):
    PENDING = "pending"
    RESOLVED_ALLOW = "resolved_allow"
    RESOLVED_BLOCK = "resolved_block"


_VERDICT_STATUS = {
    "allow": ReviewStatus.RESOLVED_ALLOW,
    "block": ReviewStatus.RESOLVED_BLOCK,
}


@dataclass
class ReviewItem:
    request_id: str
    original_text: str
    decision: dict[str, Any]  # Decision snapshot at enqueue time
    enqueued_at: float
    status: ReviewStatus = ReviewStatus.PENDING
    resolver: str | None = None
    resolved_at: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "request_id": self.request_id,
            "original_text": self.original_text,
            "decision": self.decision,
            "enqueued_at": self.enqueued_at,
            "status": self.status.value,
            "resolver": self.resolver,
            "resolved_at": self.resolved_at,
        }


class ReviewQueue:
    def __init__(self, log_path: str | Path):
        self._path = Path(log_path)
        self._lock = threading.Lock()
        self._items: dict[str, ReviewItem] = {}
        self._order: list[str] = []
        if self._path.exists():
            self._replay()

    def _replay(self) -> None:
        for line_no, line in enumerate(self._path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                event = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{self._path}:{line_no}: corrupt event: {exc}")
            if event["event"] == "enqueue":
                item = event["item"]
                self._items[item["request_id"]] = ReviewItem(
                    request_id=item["request_id"],
                    original_text=item["original_text"],
                    decision=item["decision"],
                    enqueued_at=item["enqueued_at"],
                    status=ReviewStatus(item.get("status", "pending")),
                    resolver=item.get("resolver"),
                    resolved_at=item.get("resolved_at"),
                )
                self._order.append(item["request_id"])
            elif event["event"] == "resolve":
                item = self._items[event["request_id"]]
                item.status = ReviewStatus(event["status"])
                item.resolver = event["operator"]
                item.resolved_at = event["resolved_at"]

    def _append(self, event: dict[str, Any]) -> None:
        with self._path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()

    def enqueue(
        self,
        request_id: str,
        original_text: str,
        decision: dict[str, Any],
        enqueued_at: float | None = None,
    ) -> ReviewItem:
        item = ReviewItem(
            request_id=request_id,
            original_text=original_text,
            decision=decision,
            enqueued_at=enqueued_at if enqueued_at is not None else time.time(),
        )
        with self._lock:
            if request_id in self._items:
                raise ValueError(f"request {request_id} already enqueued")
            self._items[request_id] = item
            self._order.append(request_id)
            self._append({"event": "enqueue", "item": item.to_dict()})
        return item

    def list(self, status: ReviewStatus | str | None = None) -> list[ReviewItem]:
        """Items oldest-first, optionally filtered by status."""
        wanted = ReviewStatus(status) if isinstance(status, str) else status
        with self._lock:
            items = [self._items[rid] for rid in self._order]
        if wanted is not None:
            items = [i for i in items if i.status is wanted]
        return items

    def get(self, request_id: str) -> ReviewItem:
        with self._lock:
            if request_id not in self._items:
                raise NotFound(request_id)
            return self._items[request_id]

    def resolve(self, request_id: str, verdict: str, operator: str) -> ReviewItem:
        """Resolve a pending item exactly once; the loser of a race gets
        AlreadyResolved."""
        if verdict not in _VERDICT_STATUS:
            raise ValueError(f"verdict must be 'allow' or 'block', got {verdict!r}")
        with self._lock:
            if request_id not in self._items:
                raise NotFound(request_id)
            item = self._items[request_id]
            if item.status is not ReviewStatus.PENDING:
                raise AlreadyResolved(request_id)
            item.status = _VERDICT_STATUS[verdict]
            item.resolver = operator
            item.resolved_at = time.time()
            self._append(
                {
                    "event": "resolve",
                    "request_id": request_id,
                    "status": item.status.value,
                    "operator": operator,
                    "resolved_at": item.resolved_at,
                }
            )
            return item

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)
