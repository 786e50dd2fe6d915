"""Persistent work-item registry backed by a single SQLite file.

Many OS processes share the file; claim/finish run as single IMMEDIATE
transactions so each item is handed to exactly one worker per valid lease.
Media never lives here, only paths and metadata. Stale leases are recovered
lazily at claim time.
"""

from __future__ import annotations

import json
import os
import sqlite3
import time
from dataclasses import dataclass, field
from pathlib import Path

KINDS = ("video", "clip", "track")
STAGES = ("collect", "preprocess", "track", "feature", "review")
STATUSES = ("unprocessed", "processing", "completed", "discarded")

DEFAULT_LEASE_SECONDS = 600.0

_SCHEMA = """
CREATE TABLE IF NOT EXISTS items (
    id TEXT PRIMARY KEY,
    kind TEXT NOT NULL,
    stage TEXT NOT NULL,
    status TEXT NOT NULL DEFAULT 'unprocessed',
    category TEXT,
    lease_expiry REAL,
    worker_id TEXT,
    payload_path TEXT,
    metadata TEXT NOT NULL DEFAULT '{}',
    created_at REAL NOT NULL,
    updated_at REAL NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_items_stage_status ON items (stage, status);
CREATE TABLE IF NOT EXISTS reviews (
    track_id TEXT NOT NULL,
    decision TEXT NOT NULL,
    criteria TEXT NOT NULL,
    reviewer TEXT,
    created_at REAL NOT NULL
);
"""


class StoreError(Exception):
    pass


class DuplicateItemError(StoreError):
    pass


class InvalidTransitionError(StoreError):
    pass


@dataclass
class WorkItem:
    id: str
    kind: str
    stage: str
    status: str = "unprocessed"
    category: str | None = None
    lease_expiry: float | None = None
    worker_id: str | None = None
    payload_path: str | None = None
    metadata: dict = field(default_factory=dict)

    @classmethod
    def _from_row(cls, row) -> "WorkItem":
        return cls(
            id=row["id"],
            kind=row["kind"],
            stage=row["stage"],
            status=row["status"],
            category=row["category"],
            lease_expiry=row["lease_expiry"],
            worker_id=row["worker_id"],
            payload_path=row["payload_path"],
            metadata=json.loads(row["metadata"]),
        )


class JobStore:
    """One instance per process; safe to use from one thread at a time."""

    def __init__(self, path: str | os.PathLike, now_fn=time.time):
        self.path = Path(path)
        self.now = now_fn
        self._conn = sqlite3.connect(str(self.path), timeout=30.0, isolation_level=None)
        self._conn.row_factory = sqlite3.Row
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.execute("PRAGMA synchronous=NORMAL")
        self._conn.executescript(_SCHEMA)

    @classmethod
    def from_env(cls, default: str = "mf_data/store.db") -> "JobStore":
        return cls(os.environ.get("MOTIONFORGE_STORE", default))

    def close(self) -> None:
        self._conn.close()

    # -- write paths ---------------------------------------------------

    def enqueue(self, item: WorkItem) -> str:
        if item.kind not in KINDS:
            raise ValueError(f"unknown kind {item.kind!r}")
        if item.stage not in STAGES:
            raise ValueError(f"unknown stage {item.stage!r}")
        now = self.now()
        try:
            self._conn.execute(
                "INSERT INTO items (id, kind, stage, status, category, payload_path,"
                " metadata, created_at, updated_at) VALUES (?,?,?,?,?,?,?,?,?)",
                (item.id, item.kind, item.stage, "unprocessed", item.category,
                 item.payload_path, json.dumps(item.metadata), now, now),
            )
        except sqlite3.IntegrityError as exc:
            raise DuplicateItemError(f"item {item.id!r} already exists") from exc
        return item.id

    def enqueue_if_absent(self, item: WorkItem) -> bool:
        """Idempotent enqueue for downstream rows; False when already present."""
        try:
            self.enqueue(item)
            return True
        except DuplicateItemError:
            return False

    def claim(self, stage: str, worker_id: str,
              lease_duration: float = DEFAULT_LEASE_SECONDS) -> WorkItem | None:
        """Atomically take one claimable item for the stage, or None.

        Claimable = unprocessed, or processing with an expired lease.
        """
        now = self.now()
        cur = self._conn.cursor()
        cur.execute("BEGIN IMMEDIATE")
        try:
            row = cur.execute(
                "SELECT * FROM items WHERE stage = ? AND (status = 'unprocessed'"
                " OR (status = 'processing' AND lease_expiry < ?)) ORDER BY id LIMIT 1",
                (stage, now),
            ).fetchone()
            if row is None:
                cur.execute("COMMIT")
                return None
            cur.execute(
                "UPDATE items SET status='processing', worker_id=?, lease_expiry=?,"
                " updated_at=? WHERE id=?",
                (worker_id, now + lease_duration, now, row["id"]),
            )
            cur.execute("COMMIT")
        except Exception:
            cur.execute("ROLLBACK")
            raise
        item = WorkItem._from_row(row)
        item.status = "processing"
        item.worker_id = worker_id
        item.lease_expiry = now + lease_duration
        return item

    def finish(self, item_id: str, outcome: str, worker_id: str,
               metadata_updates: dict | None = None) -> None:
        """Terminal transition by the lease holder. Merges metadata."""
        if outcome not in ("completed", "discarded"):
            raise ValueError(f"invalid outcome {outcome!r}")
        now = self.now()
        cur = self._conn.cursor()
        cur.execute("BEGIN IMMEDIATE")
        try:
            row = cur.execute("SELECT * FROM items WHERE id=?", (item_id,)).fetchone()
            if row is None:
                raise InvalidTransitionError(f"no such item {item_id!r}")
            if row["status"] != "processing":
                raise InvalidTransitionError(
                    f"item {item_id!r} is {row['status']}, not processing")
            if row["worker_id"] != worker_id or (row["lease_expiry"] or 0) < now:
                raise InvalidTransitionError(f"lease on {item_id!r} not held by {worker_id!r}")
            meta = json.loads(row["metadata"])
            meta.update(metadata_updates or {})
            cur.execute(
                "UPDATE items SET status=?, metadata=?, lease_expiry=NULL, updated_at=?"
                " WHERE id=?",
                (outcome, json.dumps(meta), now, item_id),
            )
            cur.execute("COMMIT")
        except Exception:
            cur.execute("ROLLBACK")
            raise

    def transition(self, item_id: str, from_status: str, to_status: str,
                   metadata_updates: dict | None = None) -> bool:
        """Compare-and-set status change without a lease (review decisions).

        Returns False when the item is not in ``from_status``.
        """
        now = self.now()
        cur = self._conn.cursor()
        cur.execute("BEGIN IMMEDIATE")
        try:
            row = cur.execute("SELECT * FROM items WHERE id=?", (item_id,)).fetchone()
            if row is None:
                raise InvalidTransitionError(f"no such item {item_id!r}")
            if row["status"] != from_status:
                cur.execute("COMMIT")
                return False
            meta = json.loads(row["metadata"])
            meta.update(metadata_updates or {})
            cur.execute(
                "UPDATE items SET status=?, metadata=?, lease_expiry=NULL, updated_at=?"
                " WHERE id=?",
                (to_status, json.dumps(meta), now, item_id),
            )
            cur.execute("COMMIT")
            return True
        except Exception:
            cur.execute("ROLLBACK")
            raise

    def update_metadata(self, item_id: str, updates: dict) -> None:
        cur = self._conn.cursor()
        cur.execute("BEGIN IMMEDIATE")
        try:
            row = cur.execute("SELECT metadata FROM items WHERE id=?", (item_id,)).fetchone()
            if row is None:
                raise InvalidTransitionError(f"no such item {item_id!r}")
            meta = json.loads(row["metadata"])
            meta.update(updates)
            cur.execute("UPDATE items SET metadata=?, updated_at=? WHERE id=?",
                        (json.dumps(meta), self.now(), item_id))
            cur.execute("COMMIT")
        except Exception:
            cur.execute("ROLLBACK")
            raise

    def record_review(self, track_id: str, decision: str, criteria: dict,
                      reviewer: str | None) -> None:
        self._conn.execute(
            "INSERT INTO reviews (track_id, decision, criteria, reviewer, created_at)"
            " VALUES (?,?,?,?,?)",
            (track_id, decision, json.dumps(criteria), reviewer, self.now()),
        )

    # -- read paths ----------------------------------------------------

    def get(self, item_id: str) -> WorkItem | None:
        row = self._conn.execute("SELECT * FROM items WHERE id=?", (item_id,)).fetchone()
        return WorkItem._from_row(row) if row else None

    def query(self, stage: str | None = None, status: str | None = None,
              category: str | None = None, kind: str | None = None,
              metadata_predicate=None) -> list[WorkItem]:
        """All matching items in deterministic id order."""
        clauses, args = [], []
        for col, val in (("stage", stage), ("status", status),
                         ("category", category), ("kind", kind)):
            if val is not None:
                clauses.append(f"{col} = ?")
                args.append(val)
        sql = "SELECT * FROM items"
        if clauses:
            sql += " WHERE " + " AND ".join(clauses)
        sql += " ORDER BY id"
        items = [WorkItem._from_row(r) for r in self._conn.execute(sql, args)]
        if metadata_predicate is not None:
            items = [it for it in items if metadata_predicate(it.metadata)]
        return items

    def counts(self) -> dict:
        out: dict = {}
        for row in self._conn.execute(
                "SELECT stage, status, COUNT(*) AS n FROM items GROUP BY stage, status"):
            out.setdefault(row["stage"], {})[row["status"]] = row["n"]
        return out

    def pending(self, stage: str) -> int:
        """Items not yet terminal for the stage (claimable now or leased)."""
        row = self._conn.execute(
            "SELECT COUNT(*) AS n FROM items WHERE stage=? AND status IN"
            " ('unprocessed','processing')", (stage,)).fetchone()
        return row["n"]

    def reviews_for(self, track_id: str) -> list[dict]:
        rows = self._conn.execute(
            "SELECT * FROM reviews WHERE track_id=? ORDER BY created_at", (track_id,))
        return [
            {"track_id": r["track_id"], "decision": r["decision"],
             "criteria": json.loads(r["criteria"]), "reviewer": r["reviewer"],
             "created_at": r["created_at"]}
            for r in rows
        ]
