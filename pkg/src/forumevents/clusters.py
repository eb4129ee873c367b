"""Rank-one components -> filtered clusters of significant users, threads, weeks."""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass

import numpy as np

from .ingest import PostRecord, PostTable, TimeIndex
from .tensor import CPModel

log = logging.getLogger(__name__)


class InconsistentClusterError(ValueError):
    pass


@dataclass
class Cluster:
    cluster_id: int
    users: list[tuple[int, float]]
    threads: list[tuple[int, float]]
    weeks: list[tuple[int, float]]

    @property
    def user_ids(self) -> set[int]:
        return {i for i, _ in self.users}

    @property
    def thread_ids(self) -> set[int]:
        return {j for j, _ in self.threads}

    @property
    def week_slots(self) -> set[int]:
        return {k for k, _ in self.weeks}

    def sizes(self) -> tuple[int, int, int]:
        return (len(self.users), len(self.threads), len(self.weeks))


@dataclass
class TopEntities:
    top_users: list[tuple[int, float]]
    top_threads: list[tuple[int, float]]
    top_weeks: list[tuple[int, float]]
    top_dates: list[dt.date]


def _mode_entries(col: np.ndarray, epsilon: float) -> list[tuple[int, float]]:
    idx = np.nonzero(col > epsilon)[0]
    # strength descending, ties by entity index ascending
    order = sorted(idx, key=lambda i: (-col[i], i))
    return [(int(i), float(col[i])) for i in order]


def extract_clusters(model: CPModel, epsilon: float = 0.0) -> list[Cluster]:
    """Keep entries with strength above epsilon; drop components empty in any mode.

    Returned clusters are ordered by component energy (product of factor
    column norms) descending; cluster_id keeps the original component index.
    """
    clusters = []
    energies = []
    for r in range(model.rank):
        users = _mode_entries(model.U[:, r], epsilon)
        threads = _mode_entries(model.T[:, r], epsilon)
        weeks = _mode_entries(model.W[:, r], epsilon)
        if not (users and threads and weeks):
            log.info("dropping empty component %d", r)
            continue
        clusters.append(Cluster(cluster_id=r, users=users, threads=threads, weeks=weeks))
        energies.append(float(np.linalg.norm(model.U[:, r]) * np.linalg.norm(model.T[:, r])
                              * np.linalg.norm(model.W[:, r])))
    order = sorted(range(len(clusters)), key=lambda n: (-energies[n], clusters[n].cluster_id))
    return [clusters[n] for n in order]


def cluster_posts(c: Cluster, table: PostTable, time: TimeIndex) -> list[PostRecord]:
    """Posts by cluster users in cluster threads during cluster weeks."""
    users = c.user_ids
    threads = c.thread_ids
    weeks = c.week_slots
    return [
        r for r in table.records
        if table.user_index[r.username] in users
        and table.thread_index[r.thread_id] in threads
        and time.slot(r.date) in weeks
    ]


def top_entities(c: Cluster, table: PostTable, time: TimeIndex, k: int = 3) -> TopEntities:
    """Strongest k entities per mode; per top week, the calendar day with the
    most cluster posts (ties broken by earliest date)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    posts = cluster_posts(c, table, time)
    top_weeks = c.weeks[:k]
    top_dates = []
    for slot, _ in top_weeks:
        counts: dict[dt.date, int] = {}
        for r in posts:
            if time.slot(r.date) == slot:
                counts[r.date] = counts.get(r.date, 0) + 1
        if counts:
            top_dates.append(min(counts, key=lambda d: (-counts[d], d)))
        else:
            top_dates.append(time.slot_start(slot))
    return TopEntities(
        top_users=c.users[:k],
        top_threads=c.threads[:k],
        top_weeks=top_weeks,
        top_dates=top_dates,
    )


@dataclass
class ClusterActivity:
    posts: list[PostRecord]
    duration_days: int
    active_days: int
    pct_active_days: float


def cluster_activity(c: Cluster, table: PostTable, time: TimeIndex) -> ClusterActivity:
    """Span and density of the cluster's own posts.

    Percentage of active days is over the inclusive day span; a single-day
    cluster is 100% by definition.
    """
    posts = cluster_posts(c, table, time)
    if not posts:
        raise InconsistentClusterError(
            f"cluster {c.cluster_id} has no posts matching its entity sets")
    dates = [r.date for r in posts]
    duration = (max(dates) - min(dates)).days
    active = len(set(dates))
    pct = 100.0 * active / (duration + 1)
    return ClusterActivity(posts=posts, duration_days=duration,
                           active_days=active, pct_active_days=pct)


def cluster_to_json(c: Cluster, table: PostTable, time: TimeIndex) -> dict:
    return {
        "cluster_id": c.cluster_id,
        "users": [{"name": table.user_name(i), "strength": s} for i, s in c.users],
        "threads": [{"id": table.thread_id_of(j),
                     "title": table.thread_title(table.thread_id_of(j)),
                     "strength": s} for j, s in c.threads],
        "weeks": [{"slot": k, "start_date": time.slot_start(k).isoformat(),
                   "strength": s} for k, s in c.weeks],
    }
