"""Content and behavior profiling of clusters.

Content side: TF-IDF cluster keywords from thread first posts, then
Jaccard-similarity labeling against user-defined class bags. Behavior side:
ten per-cluster behavioral averages, min-max normalized across the run into a
heat-map matrix with DBSCAN-based anomaly flagging.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources

from .clusters import Cluster, cluster_activity, cluster_posts
from .ingest import PostTable, TimeIndex

_WORD_RE = re.compile(r"\w+", re.UNICODE)

METRIC_NAMES = ["m1", "m2", "m3", "m4", "m5", "m6", "m7", "m8", "m9", "m10"]


def _load_stopwords() -> frozenset[str]:
    text = resources.files("forumevents.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


STOPWORDS = _load_stopwords()


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens, at least 3 chars, stop words removed."""
    return [t for t in (m.group(0).lower() for m in _WORD_RE.finditer(text))
            if len(t) >= 3 and t not in STOPWORDS]


@dataclass
class KeywordSet:
    cluster_id: int
    keywords: list[tuple[str, float]]

    @property
    def terms(self) -> set[str]:
        return {t for t, _ in self.keywords}

    def to_wordcloud_json(self) -> list[dict]:
        return [{"term": t, "weight": s} for t, s in self.keywords]


@dataclass(frozen=True)
class ClassDefinition:
    label: str
    bag: frozenset[str]

    def __post_init__(self):
        if not self.bag:
            raise ValueError(f"class {self.label!r} has an empty bag")


def default_classes() -> list[ClassDefinition]:
    raw = json.loads(resources.files("forumevents.data").joinpath("classes.json").read_text("utf-8"))
    return [ClassDefinition(label=k, bag=frozenset(w.lower() for w in v))
            for k, v in raw.items()]


@dataclass
class ClusterLabel:
    label: str
    scores: dict[str, float]
    is_mix: bool
    tied_labels: list[str] = field(default_factory=list)


def cluster_keywords(c: Cluster, table: PostTable, n: int = 50) -> KeywordSet:
    """Top-n TF-IDF keywords of the concatenated first posts of cluster threads.

    The IDF document universe is all first posts in the forum, so terms common
    to every thread score zero and never rank.
    """
    first_posts = table.first_posts()
    n_docs = len(first_posts)
    # document frequency over the whole forum's first posts
    df: dict[str, int] = {}
    for rec in first_posts.values():
        for term in set(tokenize(rec.content)):
            df[term] = df.get(term, 0) + 1

    cluster_tf: dict[str, int] = {}
    for j, _ in c.threads:
        rec = first_posts.get(table.thread_id_of(j))
        if rec is None:
            continue
        for term in tokenize(rec.content):
            cluster_tf[term] = cluster_tf.get(term, 0) + 1

    scored = []
    for term, tf in cluster_tf.items():
        idf = math.log(n_docs / df[term])
        score = tf * idf
        if score > 0.0:
            scored.append((term, score))
    scored.sort(key=lambda ts: (-ts[1], ts[0]))
    if not scored:
        import warnings

        warnings.warn(f"cluster {c.cluster_id}: empty keyword vocabulary")
    return KeywordSet(cluster_id=c.cluster_id, keywords=scored[:n])


def jaccard(a: set[str], b: set[str]) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def label_cluster(kw: KeywordSet, classes: list[ClassDefinition],
                  mix_range: float = 0.02, g_floor: float = 0.05) -> ClusterLabel:
    """Highest-Jaccard class label; Mix when the top scores are within
    mix_range of each other, G when nothing clears the floor."""
    if len(classes) < 2:
        raise ValueError("at least two classes required")
    terms = kw.terms
    scores = {cd.label: jaccard(terms, set(cd.bag)) for cd in classes}
    # argmax with ties broken by declared class order
    best = max(classes, key=lambda cd: scores[cd.label]).label
    best_score = scores[best]
    if best_score < g_floor:
        return ClusterLabel(label="G", scores=scores, is_mix=False)
    tied = [cd.label for cd in classes if best_score - scores[cd.label] <= mix_range]
    is_mix = len(tied) >= 2
    return ClusterLabel(label=best, scores=scores, is_mix=is_mix,
                        tied_labels=tied if is_mix else [])


@dataclass
class BehaviorProfile:
    cluster_id: int
    metrics: dict[str, float]

    def vector(self) -> list[float]:
        return [self.metrics[m] for m in METRIC_NAMES]


def behavior_profile(c: Cluster, table: PostTable, time: TimeIndex) -> BehaviorProfile:
    """The ten behavioral averages over the cluster's own post set."""
    activity = cluster_activity(c, table, time)
    posts = activity.posts
    first_posts = table.first_posts()

    by_user: dict[str, list] = {}
    by_thread: dict[str, list] = {}
    for r in posts:
        by_user.setdefault(r.username, []).append(r)
        by_thread.setdefault(r.thread_id, []).append(r)

    users = list(by_user)
    threads = list(by_thread)

    def post_len(r) -> int:
        return len(_WORD_RE.findall(r.content))

    # per-user averages, then averaged over cluster users
    m1 = _mean([_mean([post_len(r) for r in rs]) for rs in by_user.values()])
    initiators: dict[str, list[str]] = {}
    for tid in threads:
        initiators.setdefault(first_posts[tid].username, []).append(tid)
    initiated = {u: initiators.get(u, []) for u in users}
    m2 = _mean([len(initiated[u]) for u in users])
    m3 = _mean([len(by_user[u]) / len({r.thread_id for r in by_user[u]}) for u in users])
    m4 = _mean([len(rs) for rs in by_user.values()])
    m5 = _mean([len(rs) for rs in by_thread.values()])
    m6 = _mean([len({r.date for r in rs}) for rs in by_thread.values()])
    m7 = _mean([
        _mean([post_len(first_posts[tid]) for tid in initiated[u]]) if initiated[u] else 0.0
        for u in users
    ])
    m8 = _mean([len({r.username for r in rs}) for rs in by_thread.values()])
    m9 = float(activity.duration_days)
    m10 = activity.pct_active_days

    return BehaviorProfile(cluster_id=c.cluster_id, metrics=dict(zip(
        METRIC_NAMES, [m1, m2, m3, m4, m5, m6, m7, m8, m9, m10])))


def _mean(xs) -> float:
    xs = list(xs)
    return sum(xs) / len(xs) if xs else 0.0


def normalize_profiles(profiles: list[BehaviorProfile]) -> list[list[float]]:
    """Min-max scale each metric across clusters; constant columns map to 0."""
    if not profiles:
        raise ValueError("at least one profile required")
    rows = [p.vector() for p in profiles]
    out = [[0.0] * len(METRIC_NAMES) for _ in rows]
    for col in range(len(METRIC_NAMES)):
        vals = [row[col] for row in rows]
        lo, hi = min(vals), max(vals)
        if hi > lo:
            for i, v in enumerate(vals):
                out[i][col] = (v - lo) / (hi - lo)
    return out


@dataclass
class AnomalyResult:
    anomalous: list[int]
    unlabelable: bool = False


def detect_anomalies(matrix: list[list[float]], cluster_ids: list[int] | None = None,
                     eps: float = 0.5, min_pts: int = 3) -> AnomalyResult:
    """DBSCAN over normalized behavior rows; noise points are the anomalies."""
    import numpy as np
    from sklearn.cluster import DBSCAN

    n = len(matrix)
    if cluster_ids is None:
        cluster_ids = list(range(n))
    if n < min_pts:
        return AnomalyResult(anomalous=list(cluster_ids), unlabelable=True)
    labels = DBSCAN(eps=eps, min_samples=min_pts).fit_predict(np.asarray(matrix))
    return AnomalyResult(anomalous=[cid for cid, lab in zip(cluster_ids, labels) if lab == -1])


def scree_data(clusters: list[Cluster], profiles: list[BehaviorProfile],
               labels: dict[int, ClusterLabel],
               extra_pairs: list[tuple[str, str]] | None = None) -> dict:
    """Per-cluster point sets for the standard metric pairings, tagged by label."""
    by_id = {p.cluster_id: p for p in profiles}
    points = {"users_vs_threads": [], "active_days_pct_vs_duration": []}
    for pair in extra_pairs or []:
        points[f"{pair[0]}_vs_{pair[1]}"] = []
    for c in clusters:
        label = labels[c.cluster_id].label if c.cluster_id in labels else "G"
        p = by_id.get(c.cluster_id)
        points["users_vs_threads"].append({
            "cluster_id": c.cluster_id, "x": len(c.users), "y": len(c.threads),
            "label": label})
        if p is not None:
            points["active_days_pct_vs_duration"].append({
                "cluster_id": c.cluster_id, "x": p.metrics["m9"], "y": p.metrics["m10"],
                "label": label})
            for pair in extra_pairs or []:
                points[f"{pair[0]}_vs_{pair[1]}"].append({
                    "cluster_id": c.cluster_id, "x": p.metrics[pair[0]],
                    "y": p.metrics[pair[1]], "label": label})
    return points


def heatmap_csv(profiles: list[BehaviorProfile], normalized: list[list[float]]) -> str:
    lines = ["cluster_id," + ",".join(METRIC_NAMES)]
    for p, row in zip(profiles, normalized):
        lines.append(str(p.cluster_id) + "," + ",".join(f"{v:.6f}" for v in row))
    return "\n".join(lines) + "\n"
