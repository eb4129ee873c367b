"""Command-line interface over the store and pipeline."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import ingest, pipeline, storyline as sl
from .pipeline import RunConfig, Store


@click.group()
@click.option("--store", "store_root", default="store", envvar="FORUMEVENTS_STORE",
              show_default=True, help="Store directory.")
@click.pass_context
def main(ctx, store_root):
    """Forum event extraction: ingest posts, fit runs, inspect results."""
    ctx.obj = Store(store_root)


@main.command("ingest")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="csv", type=click.Choice(["csv", "jsonl"]),
              show_default=True)
@click.option("--dataset", required=True, help="Dataset name in the store.")
@click.pass_obj
def ingest_cmd(store: Store, input_path, fmt, dataset):
    """Parse a post log and register it as a dataset."""
    try:
        table = ingest.parse_posts(input_path, format=fmt)
    except (ingest.ParseError, ingest.DuplicatePostError) as exc:
        raise click.ClickException(str(exc))
    stats = store.add_dataset(dataset, table)
    click.echo(json.dumps({"dataset_id": dataset, "stats": stats}))


@main.command("run")
@click.option("--dataset", required=True)
@click.option("--rank", default="auto", show_default=True,
              help="'auto' or a fixed integer rank.")
@click.option("--lambda", "lam", default=1.0, show_default=True, type=float)
@click.option("--granularity", default="week", show_default=True,
              type=click.Choice(["day", "week", "month"]))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--rank-max", default=10, show_default=True, type=int,
              help="Largest candidate rank for automatic selection.")
@click.pass_obj
def run_cmd(store: Store, dataset, rank, lam, granularity, seed, rank_max):
    """Execute the full pipeline on a dataset."""
    if rank != "auto":
        try:
            rank = int(rank)
        except ValueError:
            raise click.ClickException(f"--rank must be 'auto' or an integer, got {rank!r}")
    config = RunConfig(granularity=granularity, rank=rank, lam=lam,
                       seed=seed, rank_max=rank_max)
    try:
        art = pipeline.run_pipeline(store, dataset, config)
    except pipeline.NotFoundError as exc:
        raise click.ClickException(str(exc.args[0]))
    except pipeline.PipelineError as exc:
        raise click.ClickException(f"run failed at stage {exc.stage}: {exc.cause}")
    n = len(art.read_json("clusters.json")["clusters"])
    click.echo(json.dumps({"run_id": art.run_id, "status": art.status, "clusters": n}))


@main.command("relabel")
@click.option("--run", "run_id", required=True)
@click.option("--classes", "classes_path", required=True,
              type=click.Path(exists=True), help="JSON file: {label: [words]}.")
@click.pass_obj
def relabel_cmd(store: Store, run_id, classes_path):
    """Recompute class labels for a finished run; no refit."""
    with open(classes_path, "r", encoding="utf-8") as fh:
        classes = pipeline.classes_from_json(json.load(fh))
    try:
        art = pipeline.relabel_run(store, run_id, classes)
    except (pipeline.NotFoundError, pipeline.ConflictError) as exc:
        raise click.ClickException(str(exc.args[0]) if exc.args else str(exc))
    doc = art.read_json("clusters.json")
    labels = {c["cluster_id"]: c["label"]["label"] for c in doc["clusters"]}
    click.echo(json.dumps({"run_id": run_id, "labels": labels}))


@main.command("report")
@click.option("--run", "run_id", required=True)
@click.option("--view", required=True,
              type=click.Choice(["storyline", "tableview", "heatmap", "scree"]))
@click.option("--format", "fmt", default="json", show_default=True,
              type=click.Choice(["json", "csv", "html"]))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.pass_obj
def report_cmd(store: Store, run_id, view, fmt, out_dir):
    """Export a run view to files in OUT."""
    try:
        art = store.load_run(run_id)
    except pipeline.NotFoundError as exc:
        raise click.ClickException(str(exc.args[0]))
    if art.status != "done":
        raise click.ClickException(f"run {run_id} is {art.status}, not done")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name: str, text: str):
        (out / name).write_text(text, encoding="utf-8")
        written.append(name)

    if view == "tableview":
        rows = art.read_json("tableview.json")
        if fmt == "csv":
            tv = [sl.TableViewRow(
                forum_cid=r["forum_cid"], n_users=r["n_users"],
                type_label=r["type"], top_threads=r["top_threads"],
                top_users=r["top_users"], top_dates=r["top_dates"],
                dominant_topics=r["dominant_topics"]) for r in rows]
            emit("tableview.csv", sl.tableview_to_csv(tv))
        else:
            emit("tableview.json", json.dumps(rows, indent=2, sort_keys=True) + "\n")
    elif view == "heatmap":
        emit("heatmap.csv", pipeline.heatmap_for(art))
    elif view == "scree":
        emit("scree.json", json.dumps(pipeline.scree_for(art, store),
                                      indent=2, sort_keys=True) + "\n")
    elif view == "storyline":
        doc = art.read_json("clusters.json")
        for cdoc in doc["clusters"]:
            cid = cdoc["cluster_id"]
            story = pipeline.load_storyline(art, cid)
            if story is None:
                continue
            if fmt == "html":
                emit(f"storyline_{cid}.html", sl.storyline_to_html(story))
            else:
                emit(f"storyline_{cid}.json",
                     json.dumps(sl.storyline_to_json(story), indent=2, sort_keys=True) + "\n")
    if view != "storyline" and fmt == "html" or (view == "heatmap" and fmt != "csv"):
        click.echo("note: view exported in its native format", err=True)
    click.echo(json.dumps({"run_id": run_id, "written": written}))


@main.command("synth")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True),
              help="JSON spec of planted blocks.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_obj
def synth_cmd(store: Store, spec_path, out_path):
    """Generate a synthetic planted-event post log as CSV."""
    from .synth import generate_synthetic, load_spec

    try:
        spec = load_spec(spec_path)
    except (KeyError, ValueError) as exc:
        raise click.ClickException(f"invalid spec: {exc}")
    records = generate_synthetic(spec)
    table = ingest.PostTable(records=records, user_index={}, thread_index={},
                             min_date=None, max_date=None)
    ingest.export_posts(table, out_path)
    click.echo(json.dumps({"posts": len(records), "out": out_path}))


@main.command("serve")
@click.option("--store", "store_root", default=None,
              help="Store directory (overrides the global option).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.pass_obj
def serve_cmd(store: Store, store_root, host, port):
    """Run the HTTP API."""
    from .service import serve

    serve(store_root or store.root, host=host, port=port)


if __name__ == "__main__":
    main()
