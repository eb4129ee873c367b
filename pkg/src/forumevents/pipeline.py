"""Run orchestration: dataset store, staged pipeline execution, artifacts.

A run is identified by a content hash of the dataset bytes plus the run
configuration, making execution idempotent and artifacts reproducible. Each
run directory holds manifest.json, factors.bin, clusters.json, profiles.csv,
storylines/ and tableview.json; run.json tracks status.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import shutil
from dataclasses import dataclass, field
from pathlib import Path

from . import clusters as cl
from . import ingest, profiling, storyline as sl, tensor

STATUS_ORDER = ["queued", "fitting", "profiling", "done", "failed"]


class PipelineError(RuntimeError):
    """Stage failure; carries the stage name for error reporting."""

    def __init__(self, stage: str, cause: str):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


class ConflictError(RuntimeError):
    pass


class NotFoundError(KeyError):
    pass


@dataclass
class RunConfig:
    granularity: str = "week"
    rank: str | int = "auto"
    lam: float = 1.0
    keywords_n: int = 50
    th_dom: float = 0.70
    r_t: int = 5
    top_k: int = 3
    seed: int = 0
    rank_max: int = 10
    epsilon: float = 0.0
    classes: list[profiling.ClassDefinition] | None = None

    def resolved_classes(self) -> list[profiling.ClassDefinition]:
        return self.classes if self.classes is not None else profiling.default_classes()

    def to_json(self) -> dict:
        return {
            "granularity": self.granularity,
            "rank": self.rank,
            "lambda": self.lam,
            "keywords_n": self.keywords_n,
            "th_dom": self.th_dom,
            "r_t": self.r_t,
            "top_k": self.top_k,
            "seed": self.seed,
            "rank_max": self.rank_max,
            "epsilon": self.epsilon,
            "classes": {c.label: sorted(c.bag) for c in self.resolved_classes()},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RunConfig":
        cfg = cls(
            granularity=doc.get("granularity", "week"),
            rank=doc.get("rank", "auto"),
            lam=float(doc.get("lambda", 1.0)),
            keywords_n=int(doc.get("keywords_n", 50)),
            th_dom=float(doc.get("th_dom", 0.70)),
            r_t=int(doc.get("r_t", 5)),
            top_k=int(doc.get("top_k", 3)),
            seed=int(doc.get("seed", 0)),
            rank_max=int(doc.get("rank_max", 10)),
            epsilon=float(doc.get("epsilon", 0.0)),
        )
        if "classes" in doc and doc["classes"] is not None:
            cfg.classes = classes_from_json(doc["classes"])
        return cfg


def classes_from_json(doc: dict) -> list[profiling.ClassDefinition]:
    return [profiling.ClassDefinition(label=k, bag=frozenset(w.lower() for w in v))
            for k, v in doc.items()]


def _dump_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@dataclass
class RunArtifact:
    run_id: str
    dataset: str
    config: RunConfig
    path: Path
    status: str = "queued"
    stage: str | None = None
    error: str | None = None

    def set_status(self, status: str, stage: str | None = None, error: str | None = None):
        if status != "failed" and STATUS_ORDER.index(status) < STATUS_ORDER.index(self.status):
            raise ValueError(f"status cannot move back from {self.status} to {status}")
        self.status = status
        self.stage = stage
        self.error = error
        _dump_json(self.path / "run.json", {
            "run_id": self.run_id,
            "dataset": self.dataset,
            "config": self.config.to_json(),
            "status": self.status,
            "stage": self.stage,
            "error": self.error,
        })

    def read_json(self, name: str):
        p = self.path / name
        if not p.exists():
            raise NotFoundError(name)
        return json.loads(p.read_text("utf-8"))

    def read_text(self, name: str) -> str:
        p = self.path / name
        if not p.exists():
            raise NotFoundError(name)
        return p.read_text("utf-8")


class Store:
    """File-backed store: datasets/ holds post logs, runs/ holds artifacts."""

    def __init__(self, root):
        self.root = Path(root)
        (self.root / "datasets").mkdir(parents=True, exist_ok=True)
        (self.root / "runs").mkdir(parents=True, exist_ok=True)

    # datasets ---------------------------------------------------------------

    def dataset_path(self, name: str) -> Path:
        return self.root / "datasets" / name / "posts.csv"

    def add_dataset(self, name: str, table: ingest.PostTable) -> dict:
        d = self.root / "datasets" / name
        d.mkdir(parents=True, exist_ok=True)
        ingest.export_posts(table, str(d / "posts.csv"))
        stats = ingest.forum_stats(table)
        _dump_json(d / "meta.json", stats)
        return stats

    def load_dataset(self, name: str) -> ingest.PostTable:
        p = self.dataset_path(name)
        if not p.exists():
            raise NotFoundError(f"dataset {name!r}")
        return ingest.parse_posts(str(p))

    def list_datasets(self) -> list[str]:
        return sorted(p.name for p in (self.root / "datasets").iterdir() if p.is_dir())

    def dataset_stats(self, name: str) -> dict:
        p = self.root / "datasets" / name / "meta.json"
        if not p.exists():
            raise NotFoundError(f"dataset {name!r}")
        return json.loads(p.read_text("utf-8"))

    # runs -------------------------------------------------------------------

    def run_id_for(self, dataset: str, config: RunConfig) -> str:
        h = hashlib.sha256()
        h.update(self.dataset_path(dataset).read_bytes())
        h.update(json.dumps(config.to_json(), sort_keys=True).encode("utf-8"))
        return h.hexdigest()[:12]

    def run_dir(self, run_id: str) -> Path:
        return self.root / "runs" / run_id

    def load_run(self, run_id: str) -> RunArtifact:
        p = self.run_dir(run_id) / "run.json"
        if not p.exists():
            raise NotFoundError(f"run {run_id!r}")
        doc = json.loads(p.read_text("utf-8"))
        art = RunArtifact(
            run_id=doc["run_id"],
            dataset=doc["dataset"],
            config=RunConfig.from_json(doc["config"]),
            path=self.run_dir(run_id),
        )
        art.status = doc["status"]
        art.stage = doc.get("stage")
        art.error = doc.get("error")
        return art

    def list_runs(self) -> list[str]:
        return sorted(p.name for p in (self.root / "runs").iterdir() if p.is_dir())


def run_pipeline(store: Store, dataset: str, config: RunConfig | None = None,
                 fresh: bool = False) -> RunArtifact:
    """Execute ingest -> decompose -> extract -> profile -> investigate.

    Idempotent: a finished run for the same dataset bytes and config is
    returned as-is. Any stage failure leaves the run in status failed with the
    stage name and cause preserved.
    """
    if config is None:
        config = RunConfig()
    run_id = store.run_id_for(dataset, config)
    path = store.run_dir(run_id)
    if path.exists() and not fresh:
        art = store.load_run(run_id)
        if art.status == "done":
            return art
    if path.exists():
        shutil.rmtree(path)
    path.mkdir(parents=True)
    (path / "storylines").mkdir()

    art = RunArtifact(run_id=run_id, dataset=dataset, config=config, path=path)
    art.set_status("queued")

    def fail(stage: str, exc: Exception):
        art.set_status("failed", stage=stage, error=str(exc))
        raise PipelineError(stage, str(exc)) from exc

    # ingest
    try:
        table = store.load_dataset(dataset)
        time = ingest.discretize(table, config.granularity)
        x = ingest.build_tensor(table, time)
    except Exception as exc:
        fail("ingest", exc)

    # decompose
    art.set_status("fitting")
    try:
        opts = tensor.SolverOptions(lam=config.lam, seed=config.seed)
        selection = None
        if config.rank == "auto":
            r_max = max(2, min(config.rank_max, min(x.shape)))
            selection = tensor.autoten_rank(x, r_max, opts)
            rank = selection.rank
        else:
            rank = int(config.rank)
        model = tensor.cp_als_nn_l1(x, rank, opts)
        tensor.save_factors(path / "factors.bin", model)
        tensor.write_manifest(path / "manifest.json", model, opts, selection)
    except Exception as exc:
        fail("decompose", exc)

    # extract + profile
    art.set_status("profiling")
    try:
        clusters = cl.extract_clusters(model, epsilon=config.epsilon)
        classes = config.resolved_classes()
        cluster_docs = []
        keywords = {}
        labels = {}
        profiles = []
        kept = []
        for c in clusters:
            try:
                profile = profiling.behavior_profile(c, table, time)
            except cl.InconsistentClusterError:
                continue
            kept.append(c)
            profiles.append(profile)
            kw = profiling.cluster_keywords(c, table, n=config.keywords_n)
            keywords[c.cluster_id] = kw
            labels[c.cluster_id] = profiling.label_cluster(kw, classes)
        clusters = kept
        normalized = profiling.normalize_profiles(profiles) if profiles else []
        anomalies = profiling.detect_anomalies(
            normalized, cluster_ids=[c.cluster_id for c in clusters]) if profiles \
            else profiling.AnomalyResult(anomalous=[], unlabelable=True)
        for c, p in zip(clusters, profiles):
            lab = labels[c.cluster_id]
            doc = cl.cluster_to_json(c, table, time)
            doc["keywords"] = [[t, s] for t, s in keywords[c.cluster_id].keywords]
            doc["label"] = {
                "label": lab.label, "scores": lab.scores,
                "is_mix": lab.is_mix, "tied_labels": lab.tied_labels,
            }
            doc["metrics"] = p.metrics
            doc["anomalous"] = c.cluster_id in anomalies.anomalous
            cluster_docs.append(doc)
        _dump_json(path / "clusters.json", {
            "clusters": cluster_docs,
            "anomaly_unlabelable": anomalies.unlabelable,
        })
        lines = ["cluster_id," + ",".join(profiling.METRIC_NAMES) + ",anomalous"]
        for c, p in zip(clusters, profiles):
            lines.append(str(c.cluster_id) + ","
                         + ",".join(f"{p.metrics[m]:.6f}" for m in profiling.METRIC_NAMES)
                         + "," + ("1" if c.cluster_id in anomalies.anomalous else "0"))
        (path / "profiles.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    except Exception as exc:
        fail("profile", exc)

    # investigate
    try:
        storylines = {}
        for c in clusters:
            try:
                tm = sl.fit_titles_lda(c, table, seed=config.seed)
            except sl.StorylineUnavailable as exc:
                _dump_json(path / "storylines" / f"cluster_{c.cluster_id}.json",
                           {"cluster_id": c.cluster_id, "unavailable": str(exc)})
                continue
            assignments = sl.assign_topics(tm)
            t_dom = sl.dominant_topics(assignments, th_dom=config.th_dom)
            story = sl.build_storyline(c, tm, assignments, t_dom, table, r_t=config.r_t)
            storylines[c.cluster_id] = story
            doc = sl.storyline_to_json(story)
            doc["assignments"] = {tid: [t, rel] for tid, (t, rel) in sorted(assignments.items())}
            doc["topics"] = [[[w, s] for w, s in topic] for topic in tm.topics]
            _dump_json(path / "storylines" / f"cluster_{c.cluster_id}.json", doc)
            (path / "storylines" / f"cluster_{c.cluster_id}.html").write_text(
                sl.storyline_to_html(story), encoding="utf-8")
        rows = sl.build_tableview(clusters, table, time, labels, storylines, k=config.top_k)
        _dump_json(path / "tableview.json", sl.tableview_to_json(rows))
    except Exception as exc:
        fail("investigate", exc)

    art.set_status("done")
    return art


def relabel_run(store: Store, run_id: str,
                classes: list[profiling.ClassDefinition]) -> RunArtifact:
    """Recompute labels and dependent views from stored keywords; no refit."""
    art = store.load_run(run_id)
    if art.status != "done":
        raise ConflictError(f"run {run_id} is {art.status}, not done")

    doc = art.read_json("clusters.json")
    table = store.load_dataset(art.dataset)
    time = ingest.discretize(table, art.config.granularity)

    labels = {}
    for cdoc in doc["clusters"]:
        kw = profiling.KeywordSet(
            cluster_id=cdoc["cluster_id"],
            keywords=[(t, s) for t, s in cdoc["keywords"]])
        lab = profiling.label_cluster(kw, classes)
        labels[cdoc["cluster_id"]] = lab
        cdoc["label"] = {
            "label": lab.label, "scores": lab.scores,
            "is_mix": lab.is_mix, "tied_labels": lab.tied_labels,
        }
    _dump_json(art.path / "clusters.json", doc)

    clusters = [_cluster_from_json(cdoc, table, time) for cdoc in doc["clusters"]]
    storylines = {c.cluster_id: load_storyline(art, c.cluster_id) for c in clusters}
    storylines = {cid: s for cid, s in storylines.items() if s is not None}
    rows = sl.build_tableview(clusters, table, time, labels, storylines, k=art.config.top_k)
    _dump_json(art.path / "tableview.json", sl.tableview_to_json(rows))

    new_config = RunConfig.from_json({**art.config.to_json(),
                                      "classes": {c.label: sorted(c.bag) for c in classes}})
    art.config = new_config
    art.set_status("done")
    return art


def _cluster_from_json(cdoc: dict, table: ingest.PostTable,
                       time: ingest.TimeIndex) -> cl.Cluster:
    return cl.Cluster(
        cluster_id=cdoc["cluster_id"],
        users=[(table.user_index[u["name"]], u["strength"]) for u in cdoc["users"]],
        threads=[(table.thread_index[t["id"]], t["strength"]) for t in cdoc["threads"]],
        weeks=[(w["slot"], w["strength"]) for w in cdoc["weeks"]],
    )


def load_storyline(art: RunArtifact, cluster_id: int) -> sl.StoryLine | None:
    """Stored storyline for a cluster, or None when unavailable."""
    try:
        doc = art.read_json(f"storylines/cluster_{cluster_id}.json")
    except NotFoundError:
        return None
    if "unavailable" in doc:
        return None
    return sl.StoryLine(
        cluster_id=doc["cluster_id"],
        dominant_topics=doc["dominant_topics"],
        entries=[sl.StorylineEntry(
            thread_id=e["thread_id"], title=e["title"],
            date=dt.date.fromisoformat(e["date"]),
            topic=e["topic"], relevance=e["relevance"],
        ) for e in doc["entries"]],
    )


def storyline_with_rt(art: RunArtifact, store: Store, cluster_id: int,
                      r_t: int) -> sl.StoryLine | None:
    """Re-slice a stored storyline at a different r_t without refitting."""
    try:
        doc = art.read_json(f"storylines/cluster_{cluster_id}.json")
    except NotFoundError:
        return None
    if "unavailable" in doc:
        return None
    table = store.load_dataset(art.dataset)
    assignments = {tid: (t, rel) for tid, (t, rel) in doc["assignments"].items()}
    t_dom = [d["topic"] for d in doc["dominant_topics"]]
    tm = sl.TopicModel(
        topic_count=len(doc["topics"]),
        topics=[[(w, s) for w, s in topic] for topic in doc["topics"]],
        doc_topic={})
    c = cl.Cluster(cluster_id=cluster_id, users=[], threads=[], weeks=[])
    return sl.build_storyline(c, tm, assignments, t_dom, table, r_t=r_t)


def tableview_with_k(art: RunArtifact, store: Store, k: int) -> list[dict]:
    """Rebuild the table view at a different k from stored artifacts."""
    doc = art.read_json("clusters.json")
    table = store.load_dataset(art.dataset)
    time = ingest.discretize(table, art.config.granularity)
    clusters = [_cluster_from_json(cdoc, table, time) for cdoc in doc["clusters"]]
    labels = {
        cdoc["cluster_id"]: profiling.ClusterLabel(
            label=cdoc["label"]["label"], scores=cdoc["label"]["scores"],
            is_mix=cdoc["label"]["is_mix"], tied_labels=cdoc["label"]["tied_labels"])
        for cdoc in doc["clusters"]
    }
    storylines = {c.cluster_id: load_storyline(art, c.cluster_id) for c in clusters}
    storylines = {cid: s for cid, s in storylines.items() if s is not None}
    rows = sl.build_tableview(clusters, table, time, labels, storylines, k=k)
    return sl.tableview_to_json(rows)


def heatmap_for(art: RunArtifact) -> str:
    """Normalized behavior heat map CSV derived from the stored profiles."""
    doc = art.read_json("clusters.json")
    profiles = [profiling.BehaviorProfile(cluster_id=c["cluster_id"],
                                          metrics=c["metrics"])
                for c in doc["clusters"]]
    if not profiles:
        return "cluster_id," + ",".join(profiling.METRIC_NAMES) + "\n"
    normalized = profiling.normalize_profiles(profiles)
    return profiling.heatmap_csv(profiles, normalized)


def scree_for(art: RunArtifact, store: Store) -> dict:
    doc = art.read_json("clusters.json")
    table = store.load_dataset(art.dataset)
    time = ingest.discretize(table, art.config.granularity)
    clusters = [_cluster_from_json(c, table, time) for c in doc["clusters"]]
    profiles = [profiling.BehaviorProfile(cluster_id=c["cluster_id"],
                                          metrics=c["metrics"])
                for c in doc["clusters"]]
    labels = {
        c["cluster_id"]: profiling.ClusterLabel(
            label=c["label"]["label"], scores=c["label"]["scores"],
            is_mix=c["label"]["is_mix"], tied_labels=c["label"]["tied_labels"])
        for c in doc["clusters"]
    }
    return profiling.scree_data(clusters, profiles, labels)
