"""Cluster investigation: topic-model storylines and the per-cluster table view.

Thread titles are the topic corpus. A collapsed Gibbs LDA assigns each title a
topic mixture; the dominant topics are the shortest count-ordered prefix
covering the thread threshold, and the storyline lists the most relevant
threads of those topics in date order.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .clusters import Cluster, TopEntities, top_entities
from .ingest import PostTable, TimeIndex
from .profiling import ClusterLabel, tokenize

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = lambda f: f

GIBBS_SWEEPS = 500
BETA = 0.01


class StorylineUnavailable(ValueError):
    pass


@dataclass
class TopicModel:
    topic_count: int
    topics: list[list[tuple[str, float]]]
    doc_topic: dict[str, np.ndarray]


@dataclass
class StorylineEntry:
    thread_id: str
    title: str
    date: dt.date
    topic: int
    relevance: float


@dataclass
class StoryLine:
    cluster_id: int
    dominant_topics: list[dict]
    entries: list[StorylineEntry]


@dataclass
class TableViewRow:
    forum_cid: str
    n_users: int
    type_label: str
    top_threads: list[str]
    top_users: list[str]
    top_dates: list[str]
    dominant_topics: list[str]


@njit(cache=True)
def _gibbs_sweep(doc_of, word_of, topic_of, n_dk, n_kw, n_k, alpha, beta, uniforms):
    n_topics = n_k.shape[0]
    vocab = n_kw.shape[1]
    probs = np.empty(n_topics)
    for t in range(doc_of.shape[0]):
        d = doc_of[t]
        w = word_of[t]
        z = topic_of[t]
        n_dk[d, z] -= 1
        n_kw[z, w] -= 1
        n_k[z] -= 1
        total = 0.0
        for k in range(n_topics):
            p = (n_dk[d, k] + alpha) * (n_kw[k, w] + beta) / (n_k[k] + vocab * beta)
            total += p
            probs[k] = total
        u = uniforms[t] * total
        z_new = 0
        while probs[z_new] < u and z_new < n_topics - 1:
            z_new += 1
        topic_of[t] = z_new
        n_dk[d, z_new] += 1
        n_kw[z_new, w] += 1
        n_k[z_new] += 1


def topic_count_for(n_threads: int) -> int:
    return max(2, int(round(math.sqrt(n_threads))))


def fit_titles_lda(c: Cluster, table: PostTable, seed: int = 0,
                   sweeps: int = GIBBS_SWEEPS) -> TopicModel:
    """Collapsed Gibbs LDA over the tokenized titles of cluster threads."""
    docs: list[tuple[str, list[str]]] = []
    for j, _ in c.threads:
        tid = table.thread_id_of(j)
        tokens = tokenize(table.thread_title(tid))
        if tokens:
            docs.append((tid, tokens))
    if len(docs) < 2:
        raise StorylineUnavailable(
            f"cluster {c.cluster_id}: fewer than 2 threads with usable titles")

    n_topics = topic_count_for(len(c.threads))
    alpha = 50.0 / n_topics

    vocab: dict[str, int] = {}
    doc_of, word_of = [], []
    for d, (_, tokens) in enumerate(docs):
        for tok in tokens:
            if tok not in vocab:
                vocab[tok] = len(vocab)
            doc_of.append(d)
            word_of.append(vocab[tok])
    doc_of = np.asarray(doc_of, dtype=np.int64)
    word_of = np.asarray(word_of, dtype=np.int64)
    n_tokens = doc_of.shape[0]

    rng = np.random.default_rng(seed)
    topic_of = rng.integers(0, n_topics, n_tokens)
    n_dk = np.zeros((len(docs), n_topics), dtype=np.float64)
    n_kw = np.zeros((n_topics, len(vocab)), dtype=np.float64)
    n_k = np.zeros(n_topics, dtype=np.float64)
    for t in range(n_tokens):
        n_dk[doc_of[t], topic_of[t]] += 1
        n_kw[topic_of[t], word_of[t]] += 1
        n_k[topic_of[t]] += 1

    for _ in range(sweeps):
        uniforms = rng.random(n_tokens)
        _gibbs_sweep(doc_of, word_of, topic_of, n_dk, n_kw, n_k, alpha, BETA, uniforms)

    words_by_id = [None] * len(vocab)
    for w, idx in vocab.items():
        words_by_id[idx] = w
    topics = []
    for k in range(n_topics):
        phi = (n_kw[k] + BETA) / (n_k[k] + len(vocab) * BETA)
        order = sorted(range(len(vocab)), key=lambda w: (-phi[w], words_by_id[w]))
        topics.append([(words_by_id[w], float(phi[w])) for w in order[:10]])

    doc_topic = {}
    for d, (tid, tokens) in enumerate(docs):
        theta = (n_dk[d] + alpha) / (len(tokens) + n_topics * alpha)
        doc_topic[tid] = theta
    return TopicModel(topic_count=n_topics, topics=topics, doc_topic=doc_topic)


def assign_topics(tm: TopicModel) -> dict[str, tuple[int, float]]:
    """Thread -> (argmax topic, relevance); ties go to the lower topic id."""
    out = {}
    for tid, theta in tm.doc_topic.items():
        t = int(np.argmax(theta))  # argmax returns the first (lowest) index on ties
        out[tid] = (t, float(theta[t]))
    return out


def dominant_topics(assignments: dict[str, tuple[int, float]],
                    th_dom: float = 0.70) -> list[int]:
    """Shortest prefix of topics, by assigned-thread count, covering th_dom."""
    if not assignments:
        raise ValueError("no assignments")
    counts: dict[int, int] = {}
    for t, _ in assignments.values():
        counts[t] = counts.get(t, 0) + 1
    order = sorted(counts, key=lambda t: (-counts[t], t))
    total = len(assignments)
    chosen, covered = [], 0
    for t in order:
        chosen.append(t)
        covered += counts[t]
        if covered / total >= th_dom:
            break
    return chosen


def build_storyline(c: Cluster, tm: TopicModel, assignments: dict[str, tuple[int, float]],
                    t_dom: list[int], table: PostTable, r_t: int = 5) -> StoryLine:
    """Up to r_t most relevant threads per dominant topic, shown date-ascending."""
    if not t_dom:
        raise ValueError("dominant topic list is empty")
    first_posts = table.first_posts()
    entries: list[StorylineEntry] = []
    for topic in t_dom:
        members = [(tid, rel) for tid, (t, rel) in assignments.items() if t == topic]
        members.sort(key=lambda m: (-m[1], m[0]))
        for tid, rel in members[:r_t]:
            entries.append(StorylineEntry(
                thread_id=tid,
                title=table.thread_title(tid),
                date=first_posts[tid].date,
                topic=topic,
                relevance=rel,
            ))
    entries.sort(key=lambda e: (e.date, e.thread_id))
    dom = []
    for topic in t_dom:
        share = sum(1 for t, _ in assignments.values() if t == topic) / len(assignments)
        dom.append({"topic": topic,
                    "top_words": [w for w, _ in tm.topics[topic][:5]],
                    "thread_share": share})
    return StoryLine(cluster_id=c.cluster_id, dominant_topics=dom, entries=entries)


def storyline_to_json(s: StoryLine) -> dict:
    return {
        "cluster_id": s.cluster_id,
        "dominant_topics": s.dominant_topics,
        "entries": [{
            "thread_id": e.thread_id, "title": e.title, "date": e.date.isoformat(),
            "topic": e.topic, "relevance": e.relevance,
        } for e in s.entries],
    }


def storyline_to_html(s: StoryLine) -> str:
    items = "\n".join(
        f'    <li><span class="date">{e.date.isoformat()}</span> '
        f'<span class="title">{_escape(e.title)}</span> '
        f'<span class="score">({e.relevance:.2f})</span></li>'
        for e in s.entries
    )
    return (f'<div class="storyline" data-cluster="{s.cluster_id}">\n'
            f'  <ol class="timeline">\n{items}\n  </ol>\n</div>\n')


def _escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def build_tableview(clusters: list[Cluster], table: PostTable, time: TimeIndex,
                    labels: dict[int, ClusterLabel],
                    storylines: dict[int, StoryLine], k: int = 3) -> list[TableViewRow]:
    """One row per cluster: top entities plus dominant topic words."""
    forum_id = table.records[0].forum_id if table.records else ""
    rows = []
    for c in clusters:
        te = top_entities(c, table, time, k=k)
        label = labels.get(c.cluster_id)
        sl = storylines.get(c.cluster_id)
        topic_words: list[str] = []
        if sl:
            for d in sl.dominant_topics:
                topic_words.extend(d["top_words"])
        rows.append(TableViewRow(
            forum_cid=f"{forum_id}-{c.cluster_id}",
            n_users=len(c.users),
            type_label=("Mix" if label and label.is_mix else label.label if label else "G"),
            top_threads=[table.thread_id_of(j) for j, _ in te.top_threads],
            top_users=[table.user_name(i) for i, _ in te.top_users],
            top_dates=[d.isoformat() for d in te.top_dates],
            dominant_topics=topic_words,
        ))
    return rows


def tableview_to_json(rows: list[TableViewRow]) -> list[dict]:
    return [{
        "forum_cid": r.forum_cid, "n_users": r.n_users, "type": r.type_label,
        "top_threads": r.top_threads, "top_users": r.top_users,
        "top_dates": r.top_dates, "dominant_topics": r.dominant_topics,
    } for r in rows]


def tableview_to_csv(rows: list[TableViewRow]) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["forum_cid", "n_users", "type", "top_threads", "top_users",
                     "top_dates", "dominant_topics"])
    for r in rows:
        writer.writerow([r.forum_cid, r.n_users, r.type_label,
                         ";".join(r.top_threads), ";".join(r.top_users),
                         ";".join(r.top_dates), ";".join(r.dominant_topics)])
    return buf.getvalue()
