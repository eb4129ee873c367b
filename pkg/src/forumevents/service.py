"""HTTP API over the run store.

JSON in and out; errors are {code, message, stage?}. Fitting jobs run one at
a time per process, readers are unrestricted.
"""

from __future__ import annotations

import io
import threading

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from . import ingest, pipeline, storyline as sl
from .pipeline import ConflictError, NotFoundError, PipelineError, RunConfig, Store


def _error(status: int, code: str, message: str, stage: str | None = None):
    body = {"code": code, "message": message}
    if stage:
        body["stage"] = stage
    return JSONResponse(status_code=status, content=body)


def create_app(store_root) -> FastAPI:
    store = Store(store_root)
    app = FastAPI(title="forumevents")
    fit_lock = threading.Lock()

    @app.exception_handler(NotFoundError)
    async def _nf(request: Request, exc: NotFoundError):
        return _error(404, "not_found", str(exc.args[0]) if exc.args else "not found")

    @app.exception_handler(ConflictError)
    async def _cf(request: Request, exc: ConflictError):
        return _error(409, "conflict", str(exc))

    @app.exception_handler(PipelineError)
    async def _pf(request: Request, exc: PipelineError):
        return _error(422, "pipeline_failed", exc.cause, stage=exc.stage)

    @app.exception_handler(ValueError)
    async def _vf(request: Request, exc: ValueError):
        return _error(400, "bad_request", str(exc))

    # datasets ---------------------------------------------------------------

    @app.post("/api/datasets")
    async def post_dataset(body: dict):
        for key in ("name", "content"):
            if key not in body:
                return _error(400, "bad_request", f"missing field {key!r}")
        fmt = body.get("format", "csv")
        try:
            table = ingest.parse_posts(io.StringIO(body["content"]), format=fmt)
        except (ingest.ParseError, ingest.DuplicatePostError, ValueError) as exc:
            return _error(400, "parse_error", str(exc))
        stats = store.add_dataset(body["name"], table)
        return {"dataset_id": body["name"], "stats": stats}

    @app.get("/api/datasets")
    async def list_datasets():
        return [{"dataset_id": name, "stats": store.dataset_stats(name)}
                for name in store.list_datasets()]

    @app.get("/api/datasets/{dataset_id}/threads/{thread_id}")
    async def get_thread(dataset_id: str, thread_id: str):
        table = store.load_dataset(dataset_id)
        posts = table.thread_posts(thread_id)
        if not posts:
            return _error(404, "not_found", f"thread {thread_id!r}")
        posts = sorted(posts, key=lambda r: (r.date, r.post_id))
        return {
            "thread_id": thread_id,
            "title": table.thread_title(thread_id),
            "posts": [{
                "post_id": r.post_id, "username": r.username,
                "date": r.date.isoformat(), "content": r.content,
            } for r in posts],
        }

    # runs -------------------------------------------------------------------

    def _execute(dataset: str, config: RunConfig):
        with fit_lock:
            try:
                pipeline.run_pipeline(store, dataset, config)
            except PipelineError:
                pass  # status recorded in run.json

    @app.post("/api/runs")
    async def post_run(body: dict):
        if "dataset" not in body:
            return _error(400, "bad_request", "missing field 'dataset'")
        dataset = body["dataset"]
        if not store.dataset_path(dataset).exists():
            return _error(404, "not_found", f"dataset {dataset!r}")
        config = RunConfig.from_json(body.get("config", {}))
        run_id = store.run_id_for(dataset, config)
        existing = None
        try:
            existing = store.load_run(run_id)
        except NotFoundError:
            pass
        if existing is not None and existing.status == "done":
            return {"run_id": run_id, "status": "done"}
        if body.get("wait"):
            _execute(dataset, config)
            return {"run_id": run_id, "status": store.load_run(run_id).status}
        if existing is None:
            # visible as queued before the worker picks it up
            path = store.run_dir(run_id)
            path.mkdir(parents=True, exist_ok=True)
            art = pipeline.RunArtifact(run_id=run_id, dataset=dataset,
                                       config=config, path=path)
            art.set_status("queued")
        thread = threading.Thread(target=_execute, args=(dataset, config), daemon=True)
        thread.start()
        return {"run_id": run_id, "status": "queued"}

    @app.get("/api/runs")
    async def list_runs():
        out = []
        for run_id in store.list_runs():
            art = store.load_run(run_id)
            out.append({"run_id": run_id, "dataset": art.dataset,
                        "status": art.status})
        return out

    @app.get("/api/runs/{run_id}")
    async def get_run(run_id: str):
        art = store.load_run(run_id)
        return {
            "run_id": art.run_id, "dataset": art.dataset,
            "config": art.config.to_json(), "status": art.status,
            "stage": art.stage, "error": art.error,
        }

    def _done_run(run_id: str) -> pipeline.RunArtifact:
        art = store.load_run(run_id)
        if art.status != "done":
            raise ConflictError(f"run {run_id} is {art.status}, not done")
        return art

    @app.get("/api/runs/{run_id}/clusters")
    async def get_clusters(run_id: str):
        art = _done_run(run_id)
        return art.read_json("clusters.json")["clusters"]

    @app.get("/api/runs/{run_id}/clusters/{cid}")
    async def get_cluster(run_id: str, cid: int):
        art = _done_run(run_id)
        for cdoc in art.read_json("clusters.json")["clusters"]:
            if cdoc["cluster_id"] == cid:
                return cdoc
        return _error(404, "not_found", f"cluster {cid}")

    @app.get("/api/runs/{run_id}/clusters/{cid}/storyline")
    async def get_storyline(run_id: str, cid: int, rt: int | None = None):
        art = _done_run(run_id)
        if rt is None or rt == art.config.r_t:
            story = pipeline.load_storyline(art, cid)
        else:
            story = pipeline.storyline_with_rt(art, store, cid, r_t=rt)
        if story is None:
            return _error(404, "storyline_unavailable",
                          f"no storyline for cluster {cid}")
        return sl.storyline_to_json(story)

    @app.get("/api/runs/{run_id}/tableview")
    async def get_tableview(run_id: str, k: int | None = None):
        art = _done_run(run_id)
        if k is None or k == art.config.top_k:
            return art.read_json("tableview.json")
        return pipeline.tableview_with_k(art, store, k=k)

    @app.get("/api/runs/{run_id}/heatmap")
    async def get_heatmap(run_id: str):
        art = _done_run(run_id)
        return PlainTextResponse(pipeline.heatmap_for(art), media_type="text/csv")

    @app.get("/api/runs/{run_id}/scree")
    async def get_scree(run_id: str):
        art = _done_run(run_id)
        return pipeline.scree_for(art, store)

    @app.post("/api/runs/{run_id}/relabel")
    async def post_relabel(run_id: str, body: dict):
        if "classes" not in body or not isinstance(body["classes"], dict):
            return _error(400, "bad_request", "missing field 'classes'")
        classes = pipeline.classes_from_json(body["classes"])
        art = pipeline.relabel_run(store, run_id, classes)
        return {"run_id": run_id, "status": art.status,
                "labels": {c["cluster_id"]: c["label"]["label"]
                           for c in art.read_json("clusters.json")["clusters"]}}

    return app


def serve(store_root, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(create_app(store_root), host=host, port=port)
