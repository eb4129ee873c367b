import json

import pytest
from click.testing import CliRunner

from forumevents.cli import main

SPEC = {
    "blocks": [
        {"n_users": 12, "n_threads": 14, "week_start": 0, "week_end": 3,
         "intensity": 3.0,
         "vocabulary": ["zeus", "trojan", "panel", "config", "webinject",
                        "dropper", "banker", "inject"]},
        {"n_users": 12, "n_threads": 14, "week_start": 4, "week_end": 7,
         "intensity": 3.0,
         "vocabulary": ["minecraft", "server", "plugin", "survival",
                        "redstone", "mods", "creative", "spawn"]},
    ],
    "noise_rate": 0.05,
    "seed": 2,
    "forum_id": "cli",
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """synth -> ingest -> run executed once; returns (root, run_id)."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    (root / "spec.json").write_text(json.dumps(SPEC))
    store = str(root / "store")

    res = runner.invoke(main, ["--store", store, "synth",
                               "--spec", str(root / "spec.json"),
                               "--out", str(root / "posts.csv")])
    assert res.exit_code == 0, res.output
    assert json.loads(res.output)["posts"] > 0

    res = runner.invoke(main, ["--store", store, "ingest",
                               "--input", str(root / "posts.csv"),
                               "--format", "csv", "--dataset", "d1"])
    assert res.exit_code == 0, res.output

    res = runner.invoke(main, ["--store", store, "run", "--dataset", "d1",
                               "--rank", "auto", "--lambda", "1.0",
                               "--granularity", "week", "--seed", "0",
                               "--rank-max", "4"])
    assert res.exit_code == 0, res.output
    doc = json.loads(res.output)
    assert doc["status"] == "done"
    return root, doc["run_id"]


def test_run_found_two_clusters(workspace):
    root, run_id = workspace
    runs = (root / "store" / "runs" / run_id)
    clusters = json.loads((runs / "clusters.json").read_text())["clusters"]
    assert len(clusters) == 2


def test_report_tableview_csv(workspace):
    root, run_id = workspace
    runner = CliRunner()
    out = root / "report"
    res = runner.invoke(main, ["--store", str(root / "store"), "report",
                               "--run", run_id, "--view", "tableview",
                               "--format", "csv", "--out", str(out)])
    assert res.exit_code == 0, res.output
    text = (out / "tableview.csv").read_text()
    assert text.startswith("forum_cid,n_users,type,")
    assert len(text.strip().split("\n")) == 3


def test_report_storyline_html(workspace):
    root, run_id = workspace
    runner = CliRunner()
    out = root / "report_html"
    res = runner.invoke(main, ["--store", str(root / "store"), "report",
                               "--run", run_id, "--view", "storyline",
                               "--format", "html", "--out", str(out)])
    assert res.exit_code == 0, res.output
    written = json.loads(res.output)["written"]
    assert written
    assert all(n.endswith(".html") for n in written)


def test_report_heatmap_and_scree(workspace):
    root, run_id = workspace
    runner = CliRunner()
    for view, fname in [("heatmap", "heatmap.csv"), ("scree", "scree.json")]:
        out = root / f"report_{view}"
        res = runner.invoke(main, ["--store", str(root / "store"), "report",
                                   "--run", run_id, "--view", view,
                                   "--format", "csv" if view == "heatmap" else "json",
                                   "--out", str(out)])
        assert res.exit_code == 0, res.output
        assert (out / fname).exists()


def test_relabel_via_cli(workspace):
    root, run_id = workspace
    runner = CliRunner()
    clusters = json.loads((root / "store" / "runs" / run_id /
                           "clusters.json").read_text())["clusters"]
    bag = sorted(t for t, _ in clusters[0]["keywords"])
    classes_file = root / "classes.json"
    classes_file.write_text(json.dumps({"X": bag, "Y": ["unrelated", "words"]}))
    res = runner.invoke(main, ["--store", str(root / "store"), "relabel",
                               "--run", run_id, "--classes", str(classes_file)])
    assert res.exit_code == 0, res.output
    labels = json.loads(res.output)["labels"]
    assert labels[str(clusters[0]["cluster_id"])] == "X"


def test_run_rejects_bad_rank(workspace):
    root, _ = workspace
    runner = CliRunner()
    res = runner.invoke(main, ["--store", str(root / "store"), "run",
                               "--dataset", "d1", "--rank", "three"])
    assert res.exit_code != 0
    assert "auto" in res.output


def test_ingest_reports_parse_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("forum_id,thread_id,post_id,username,date,content\n"
                   "f,t,p,u,not-a-date,hello\n")
    runner = CliRunner()
    res = runner.invoke(main, ["--store", str(tmp_path / "s"), "ingest",
                               "--input", str(bad), "--dataset", "x"])
    assert res.exit_code != 0
    assert "date" in res.output


def test_report_unknown_run(tmp_path):
    runner = CliRunner()
    res = runner.invoke(main, ["--store", str(tmp_path), "report",
                               "--run", "nope", "--view", "scree",
                               "--format", "json", "--out", str(tmp_path / "o")])
    assert res.exit_code != 0
