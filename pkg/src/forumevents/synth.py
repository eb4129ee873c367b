"""Synthetic forum generator with planted activity blocks.

Each block is a user set, a disjoint thread set, a week window, and a Poisson
post intensity per (user, thread, week) cell, with a themed vocabulary for the
generated text. Background posts land on random (user, thread, day) cells at a
rate proportional to the planted volume. Output is deterministic under the
spec seed.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field

import numpy as np

from .ingest import PostRecord

DEFAULT_ORIGIN = dt.date(2015, 1, 5)

_BACKGROUND_VOCAB = [
    "hello", "thanks", "question", "anyone", "help", "please", "looking",
    "general", "random", "discussion", "update", "info", "thread", "reply",
]


@dataclass
class PlantedBlock:
    n_users: int
    n_threads: int
    week_start: int
    week_end: int  # exclusive
    intensity: float
    vocabulary: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.n_users < 1 or self.n_threads < 1:
            raise ValueError("block needs at least one user and one thread")
        if self.week_end <= self.week_start or self.week_start < 0:
            raise ValueError(f"bad week window [{self.week_start}, {self.week_end})")
        if self.intensity <= 0:
            raise ValueError("block intensity must be positive")


@dataclass
class SyntheticSpec:
    blocks: list[PlantedBlock]
    noise_rate: float = 0.0
    seed: int = 0
    forum_id: str = "synth"
    origin: dt.date = DEFAULT_ORIGIN
    n_extra_users: int = 0
    n_extra_threads: int = 0

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("at least one planted block required")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ValueError("noise rate must be in [0, 1)")
        for b in self.blocks:
            if b.intensity <= self.noise_rate:
                raise ValueError("block intensity must exceed the noise rate")

    @property
    def total_users(self) -> int:
        return sum(b.n_users for b in self.blocks) + self.n_extra_users

    @property
    def total_threads(self) -> int:
        return sum(b.n_threads for b in self.blocks) + self.n_extra_threads

    @property
    def total_weeks(self) -> int:
        return max(b.week_end for b in self.blocks)

    def block_users(self, idx: int) -> range:
        lo = sum(b.n_users for b in self.blocks[:idx])
        return range(lo, lo + self.blocks[idx].n_users)

    def block_threads(self, idx: int) -> range:
        lo = sum(b.n_threads for b in self.blocks[:idx])
        return range(lo, lo + self.blocks[idx].n_threads)

    @classmethod
    def from_json(cls, doc: dict) -> "SyntheticSpec":
        blocks = [PlantedBlock(
            n_users=int(b["n_users"]),
            n_threads=int(b["n_threads"]),
            week_start=int(b["week_start"]),
            week_end=int(b["week_end"]),
            intensity=float(b["intensity"]),
            vocabulary=list(b.get("vocabulary", [])),
        ) for b in doc["blocks"]]
        origin = (dt.date.fromisoformat(doc["origin"])
                  if "origin" in doc else DEFAULT_ORIGIN)
        return cls(
            blocks=blocks,
            noise_rate=float(doc.get("noise_rate", 0.0)),
            seed=int(doc.get("seed", 0)),
            forum_id=str(doc.get("forum_id", "synth")),
            origin=origin,
            n_extra_users=int(doc.get("n_extra_users", 0)),
            n_extra_threads=int(doc.get("n_extra_threads", 0)),
        )


def load_spec(path: str) -> SyntheticSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return SyntheticSpec.from_json(json.load(fh))


def _words(rng: np.random.Generator, vocab: list[str], n: int) -> str:
    if not vocab:
        vocab = _BACKGROUND_VOCAB
    return " ".join(vocab[i] for i in rng.integers(0, len(vocab), n))


def generate_synthetic(spec: SyntheticSpec) -> list[PostRecord]:
    """Generate the planted-block post log as a list of records.

    Posts come out sorted by (date, post_id), one unique post id per record.
    """
    rng = np.random.default_rng(spec.seed)
    width = len(str(max(spec.total_users, spec.total_threads, 1)))
    user_name = lambda i: f"u{i:0{width}d}"
    thread_id = lambda j: f"t{j:0{width}d}"

    posts: list[tuple[dt.date, int, int, str]] = []  # (date, user, thread, content)
    for idx, b in enumerate(spec.blocks):
        users = spec.block_users(idx)
        threads = spec.block_threads(idx)
        for w in range(b.week_start, b.week_end):
            counts = rng.poisson(b.intensity, (b.n_users, b.n_threads))
            ui, ti = np.nonzero(counts)
            for u, t in zip(ui, ti):
                for _ in range(int(counts[u, t])):
                    day = int(rng.integers(0, 7))
                    date = spec.origin + dt.timedelta(days=7 * w + day)
                    posts.append((date, users[u], threads[t],
                                  _words(rng, b.vocabulary, 8)))

    n_noise = int(round(spec.noise_rate * len(posts)))
    total_days = 7 * spec.total_weeks
    for _ in range(n_noise):
        u = int(rng.integers(0, spec.total_users))
        t = int(rng.integers(0, spec.total_threads))
        day = int(rng.integers(0, total_days))
        date = spec.origin + dt.timedelta(days=day)
        posts.append((date, u, t, _words(rng, _BACKGROUND_VOCAB, 8)))

    posts.sort(key=lambda p: (p[0], p[1], p[2]))
    records = []
    for n, (date, u, t, content) in enumerate(posts):
        records.append(PostRecord(
            forum_id=spec.forum_id,
            thread_id=thread_id(t),
            post_id=f"p{n:07d}",
            username=user_name(u),
            date=date,
            content=content,
        ))
    return records
