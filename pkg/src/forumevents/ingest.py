"""Forum post log ingestion: parsing, indexing, time discretization, tensor build."""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import unicodedata
from dataclasses import dataclass, field

from .tensor import SparseTensor3

CSV_COLUMNS = ["forum_id", "thread_id", "post_id", "username", "date", "content"]

MIN_DATE = dt.date(1990, 1, 1)

SLOT_LENGTH = {"day": 1, "week": 7}


class ParseError(ValueError):
    """Malformed input row; carries the 1-based row number and offending field."""

    def __init__(self, row: int, field_name: str, message: str):
        super().__init__(f"row {row}, field '{field_name}': {message}")
        self.row = row
        self.field_name = field_name


class DuplicatePostError(ValueError):
    def __init__(self, duplicates: list[str]):
        super().__init__(f"duplicate post ids: {', '.join(sorted(duplicates))}")
        self.duplicates = sorted(duplicates)


@dataclass(frozen=True)
class PostRecord:
    forum_id: str
    thread_id: str
    post_id: str
    username: str
    date: dt.date
    content: str


@dataclass
class PostTable:
    """Ingested posts with dense user and thread indices.

    Index integers follow first appearance order in the record stream, which
    makes export -> re-parse reproduce identical indices.
    """

    records: list[PostRecord]
    user_index: dict[str, int]
    thread_index: dict[str, int]
    min_date: dt.date | None
    max_date: dt.date | None

    @property
    def n_users(self) -> int:
        return len(self.user_index)

    @property
    def n_threads(self) -> int:
        return len(self.thread_index)

    def user_name(self, i: int) -> str:
        return self._users_by_id[i]

    def thread_id_of(self, j: int) -> str:
        return self._threads_by_id[j]

    @property
    def _users_by_id(self) -> list[str]:
        if not hasattr(self, "_users_cache") or len(self._users_cache) != len(self.user_index):
            self._users_cache = [None] * len(self.user_index)
            for name, i in self.user_index.items():
                self._users_cache[i] = name
        return self._users_cache

    @property
    def _threads_by_id(self) -> list[str]:
        if not hasattr(self, "_threads_cache") or len(self._threads_cache) != len(self.thread_index):
            self._threads_cache = [None] * len(self.thread_index)
            for tid, j in self.thread_index.items():
                self._threads_cache[j] = tid
        return self._threads_cache

    def thread_posts(self, thread_id: str) -> list[PostRecord]:
        return [r for r in self.records if r.thread_id == thread_id]

    def first_posts(self) -> dict[str, PostRecord]:
        """Earliest post per thread; date ties broken by post_id lexicographic order.

        Cached: records are not mutated after construction.
        """
        cached = getattr(self, "_first_posts_cache", None)
        if cached is not None:
            return cached
        first: dict[str, PostRecord] = {}
        for r in self.records:
            cur = first.get(r.thread_id)
            if cur is None or (r.date, r.post_id) < (cur.date, cur.post_id):
                first[r.thread_id] = r
        self._first_posts_cache = first
        return first

    def thread_title(self, thread_id: str, max_chars: int = 80) -> str:
        """First line of the thread's first post, used as the thread title."""
        fp = self.first_posts().get(thread_id)
        if fp is None:
            return thread_id
        line = fp.content.strip().splitlines()[0] if fp.content.strip() else thread_id
        return line[:max_chars]


@dataclass(frozen=True)
class TimeIndex:
    granularity: str
    origin: dt.date
    slot_count: int

    def slot(self, d: dt.date) -> int:
        if self.granularity == "month":
            k = (d.year - self.origin.year) * 12 + (d.month - self.origin.month)
        else:
            k = (d - self.origin).days // SLOT_LENGTH[self.granularity]
        if not 0 <= k < self.slot_count:
            raise ValueError(f"date {d} outside time index range")
        return k

    def slot_start(self, k: int) -> dt.date:
        if self.granularity == "month":
            months = self.origin.year * 12 + (self.origin.month - 1) + k
            return dt.date(months // 12, months % 12 + 1, 1 if k > 0 else self.origin.day)
        return self.origin + dt.timedelta(days=k * SLOT_LENGTH[self.granularity])

    def slot_dates(self, k: int) -> list[dt.date]:
        """Calendar dates covered by slot k."""
        if self.granularity == "month":
            start = self.slot_start(k)
            end = self.slot_start(k + 1)
            n = (end - start).days
            return [start + dt.timedelta(days=d) for d in range(n)]
        start = self.slot_start(k)
        return [start + dt.timedelta(days=d) for d in range(SLOT_LENGTH[self.granularity])]


def _parse_date(raw: str) -> dt.date:
    raw = raw.strip()
    try:
        return dt.datetime.fromisoformat(raw).date()
    except ValueError:
        raise ValueError(f"not an ISO-8601 date: {raw!r}")


def _normalize_username(name: str) -> str:
    return unicodedata.normalize("NFC", name)


def _finalize_record(row_no: int, fields: dict[str, str], today: dt.date) -> PostRecord:
    for col in CSV_COLUMNS:
        if col not in fields or fields[col] is None:
            raise ParseError(row_no, col, "missing")
        if col != "content" and str(fields[col]).strip() == "":
            raise ParseError(row_no, col, "empty required field")
    try:
        date = _parse_date(str(fields["date"]))
    except ValueError as exc:
        raise ParseError(row_no, "date", str(exc))
    if date < MIN_DATE:
        raise ParseError(row_no, "date", f"date {date} precedes 1990")
    if date > today:
        raise ParseError(row_no, "date", f"date {date} is in the future")
    return PostRecord(
        forum_id=str(fields["forum_id"]).strip(),
        thread_id=str(fields["thread_id"]).strip(),
        post_id=str(fields["post_id"]).strip(),
        username=_normalize_username(str(fields["username"]).strip()),
        date=date,
        content=str(fields["content"]),
    )


def parse_posts(stream, format: str = "csv", today: dt.date | None = None) -> PostTable:
    """Parse a CSV or JSONL post log into an indexed PostTable.

    ``stream`` may be a text or binary file object, or a path string.
    """
    if today is None:
        today = dt.date.today()
    close = False
    if isinstance(stream, (str, bytes)) and not isinstance(stream, bytes):
        stream = open(stream, "r", encoding="utf-8", newline="")
        close = True
    elif isinstance(stream, bytes):
        stream = io.StringIO(stream.decode("utf-8"))
    elif hasattr(stream, "read") and isinstance(stream.read(0), bytes):
        stream = io.TextIOWrapper(stream, encoding="utf-8", newline="")

    try:
        records = []
        if format == "csv":
            reader = csv.reader(stream)
            try:
                header = next(reader)
            except StopIteration:
                raise ParseError(1, "header", "empty input, header row required")
            if [h.strip() for h in header] != CSV_COLUMNS:
                raise ParseError(1, "header", f"expected columns {','.join(CSV_COLUMNS)}")
            for row_no, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(CSV_COLUMNS):
                    raise ParseError(row_no, "row", f"expected {len(CSV_COLUMNS)} fields, got {len(row)}")
                records.append(_finalize_record(row_no, dict(zip(CSV_COLUMNS, row)), today))
        elif format == "jsonl":
            for row_no, line in enumerate(stream, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(row_no, "line", f"invalid JSON: {exc}")
                if not isinstance(obj, dict):
                    raise ParseError(row_no, "line", "expected a JSON object")
                records.append(_finalize_record(row_no, obj, today))
        else:
            raise ValueError(f"unknown format: {format!r}")
    finally:
        if close:
            stream.close()

    seen: dict[tuple[str, str], bool] = {}
    dupes = []
    for r in records:
        key = (r.forum_id, r.post_id)
        if key in seen:
            dupes.append(r.post_id)
        seen[key] = True
    if dupes:
        raise DuplicatePostError(dupes)

    user_index: dict[str, int] = {}
    thread_index: dict[str, int] = {}
    for r in records:
        if r.username not in user_index:
            user_index[r.username] = len(user_index)
        if r.thread_id not in thread_index:
            thread_index[r.thread_id] = len(thread_index)

    dates = [r.date for r in records]
    return PostTable(
        records=records,
        user_index=user_index,
        thread_index=thread_index,
        min_date=min(dates) if dates else None,
        max_date=max(dates) if dates else None,
    )


def export_posts(table: PostTable, out, format: str = "csv") -> None:
    """Write a PostTable back out in the ingestion format (round-trip safe)."""
    close = False
    if isinstance(out, str):
        out = open(out, "w", encoding="utf-8", newline="")
        close = True
    try:
        if format == "csv":
            writer = csv.writer(out)
            writer.writerow(CSV_COLUMNS)
            for r in table.records:
                writer.writerow([r.forum_id, r.thread_id, r.post_id, r.username,
                                 r.date.isoformat(), r.content])
        elif format == "jsonl":
            for r in table.records:
                out.write(json.dumps({
                    "forum_id": r.forum_id, "thread_id": r.thread_id,
                    "post_id": r.post_id, "username": r.username,
                    "date": r.date.isoformat(), "content": r.content,
                }, ensure_ascii=False) + "\n")
        else:
            raise ValueError(f"unknown format: {format!r}")
    finally:
        if close:
            out.close()


def discretize(table: PostTable, granularity: str = "week") -> TimeIndex:
    """Build the time axis covering [min_date, max_date] at the given granularity."""
    if granularity not in ("day", "week", "month"):
        raise ValueError(f"unknown granularity: {granularity!r}")
    if not table.records:
        raise ValueError("no temporal extent: table has no records")
    origin = table.min_date
    if granularity == "month":
        k_max = (table.max_date.year - origin.year) * 12 + (table.max_date.month - origin.month)
    else:
        k_max = (table.max_date - origin).days // SLOT_LENGTH[granularity]
    return TimeIndex(granularity=granularity, origin=origin, slot_count=k_max + 1)


def build_tensor(table: PostTable, time: TimeIndex) -> SparseTensor3:
    """Count posts per (user, thread, time slot) into a coordinate sparse tensor."""
    counts: dict[tuple[int, int, int], int] = {}
    for r in table.records:
        key = (table.user_index[r.username], table.thread_index[r.thread_id], time.slot(r.date))
        counts[key] = counts.get(key, 0) + 1
    coords = sorted(counts)
    return SparseTensor3.from_entries(
        shape=(table.n_users, table.n_threads, time.slot_count),
        coords=coords,
        values=[counts[c] for c in coords],
    )


def forum_stats(table: PostTable) -> dict:
    """Summary counts: users, threads, posts, distinct active days."""
    return {
        "users": table.n_users,
        "threads": table.n_threads,
        "posts": len(table.records),
        "active_days": len({r.date for r in table.records}),
    }
