import datetime as dt
import io

import numpy as np
import pytest

from forumevents.ingest import build_tensor, discretize, parse_posts
from forumevents.profiling import tokenize
from forumevents.synth import PlantedBlock, SyntheticSpec, generate_synthetic


def block(**kw):
    defaults = dict(n_users=5, n_threads=5, week_start=0, week_end=2, intensity=3.0)
    defaults.update(kw)
    return PlantedBlock(**defaults)


def test_spec_rejects_intensity_below_noise():
    with pytest.raises(ValueError):
        SyntheticSpec(blocks=[block(intensity=0.04)], noise_rate=0.05)


def test_spec_rejects_bad_window():
    with pytest.raises(ValueError):
        block(week_start=3, week_end=3)


def test_zero_noise_single_block_containment():
    spec = SyntheticSpec(blocks=[block(week_start=1, week_end=3)], seed=4)
    records = generate_synthetic(spec)
    assert records
    lo = spec.origin + dt.timedelta(days=7)
    hi = spec.origin + dt.timedelta(days=21)
    users = {f"u{i}" for i in range(5)}
    for r in records:
        assert lo <= r.date < hi
        assert int(r.username[1:]) < 5
        assert int(r.thread_id[1:]) < 5


def test_intensity_empirical_mean():
    # 20x20 users x threads over 3 weeks = 1200 cells at intensity 3
    spec = SyntheticSpec(
        blocks=[block(n_users=20, n_threads=20, week_start=0, week_end=3)],
        seed=9)
    records = generate_synthetic(spec)
    mean = len(records) / (20 * 20 * 3)
    assert abs(mean - 3.0) / 3.0 < 0.10


def test_disjoint_vocabularies_stay_disjoint():
    v1 = ["zeus", "trojan", "panel"]
    v2 = ["minecraft", "server", "plugin"]
    spec = SyntheticSpec(
        blocks=[block(vocabulary=v1), block(week_start=2, week_end=4, vocabulary=v2)],
        seed=1)
    records = generate_synthetic(spec)
    b1_threads = set(spec.block_threads(0))
    words1, words2 = set(), set()
    for r in records:
        j = int(r.thread_id[1:])
        (words1 if j in b1_threads else words2).update(tokenize(r.content))
    assert words1 and words2
    assert words1.isdisjoint(words2)


def test_generator_deterministic():
    spec = SyntheticSpec(blocks=[block()], noise_rate=0.05, seed=12)
    a = generate_synthetic(spec)
    b = generate_synthetic(SyntheticSpec(blocks=[block()], noise_rate=0.05, seed=12))
    assert a == b
    c = generate_synthetic(SyntheticSpec(blocks=[block()], noise_rate=0.05, seed=13))
    assert a != c


def test_noise_posts_added_at_rate():
    spec0 = SyntheticSpec(blocks=[block(n_users=20, n_threads=20)], seed=3)
    base = len(generate_synthetic(spec0))
    spec1 = SyntheticSpec(blocks=[block(n_users=20, n_threads=20)],
                          noise_rate=0.10, seed=3)
    noised = len(generate_synthetic(spec1))
    assert noised == base + round(0.10 * base)


def test_unique_post_ids_and_ingestable():
    spec = SyntheticSpec(blocks=[block(), block(week_start=2, week_end=4)],
                         noise_rate=0.05, seed=6)
    records = generate_synthetic(spec)
    assert len({r.post_id for r in records}) == len(records)
    # round-trips through the ingestion layer
    buf = io.StringIO()
    from forumevents.ingest import export_posts, PostTable

    table = PostTable(records=records,
                      user_index={}, thread_index={}, min_date=None, max_date=None)
    export_posts(table, buf)
    buf.seek(0)
    parsed = parse_posts(buf)
    assert len(parsed.records) == len(records)
    time = discretize(parsed)
    x = build_tensor(parsed, time)
    assert x.vals.sum() == len(records)
