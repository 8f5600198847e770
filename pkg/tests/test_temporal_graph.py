import gzip

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_stream, stream_from_pairs
from tgac.errors import ConfigError
from tgac.temporal_graph import (
    EventStream,
    Split,
    StreamError,
    chronological_split,
    denormalize_time,
    ingest_csv,
    load_stream,
    normalize_time,
    save_stream,
)


def test_ingest_sorts_shifts_and_reindexes(tmp_path):
    path = tmp_path / "tiny.csv"
    path.write_text("0,1,5.0\n1,2,3.0\n0,2,3.0\n")
    stream = ingest_csv(path)
    # stable sort keeps (1,2) before (0,2); min timestamp shifted to 0
    np.testing.assert_array_equal(stream.t, [0.0, 0.0, 2.0])
    raw = stream.raw_ids
    assert [(raw[s], raw[d]) for s, d in zip(stream.src, stream.dst)] == [(1, 2), (0, 2), (0, 1)]
    assert stream.num_nodes == 3
    assert stream.sort_warnings == 2


def test_ingest_empty_file_errors(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(StreamError, match="no events"):
        ingest_csv(path)


def test_ingest_malformed_row_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0,1,1.0\n0,x,2.0\n")
    with pytest.raises(StreamError, match="line 2"):
        ingest_csv(path)


def test_ingest_header_whitespace_and_gzip(tmp_path):
    path = tmp_path / "data.txt.gz"
    with gzip.open(path, "wt") as fh:
        fh.write("src dst ts\n10 11 1.0\n11 12 2.0\n")
    stream = ingest_csv(path)
    assert len(stream) == 2 and stream.num_nodes == 3
    np.testing.assert_array_equal(stream.raw_ids, [10, 11, 12])


def test_ingest_label_and_feature_columns(tmp_path):
    path = tmp_path / "feat.csv"
    path.write_text("0,1,0.0,1,0.5,-2.0\n1,0,1.0,0,0.25,3.0\n")
    stream = ingest_csv(path)
    assert stream.feat_dim == 2
    np.testing.assert_array_equal(stream.label, [1.0, 0.0])
    np.testing.assert_allclose(stream.feat, [[0.5, -2.0], [0.25, 3.0]])


def test_ingest_ragged_rows_error(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("0,1,1.0\n0,1,2.0,1\n")
    with pytest.raises(StreamError, match="line 2"):
        ingest_csv(path)


def test_cache_round_trip_bit_identical(tmp_path):
    stream = make_stream(seed=3, n_nodes=17, n_events=120, feat_dim=5, labels=True)
    path = tmp_path / "cache.bin"
    save_stream(stream, path)
    loaded = load_stream(path)
    np.testing.assert_array_equal(loaded.src, stream.src)
    np.testing.assert_array_equal(loaded.dst, stream.dst)
    np.testing.assert_array_equal(loaded.t, stream.t)
    np.testing.assert_array_equal(loaded.feat, stream.feat)
    np.testing.assert_array_equal(loaded.label, stream.label)
    assert loaded.num_nodes == stream.num_nodes
    assert loaded.directed == stream.directed


def test_ingest_serialize_ingest_round_trip(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("5,9,10.0\n9,5,11.5\n5,7,12.0\n")
    stream = ingest_csv(path)
    cache = tmp_path / "a.bin"
    save_stream(stream, cache)
    again = load_stream(cache)
    assert torch_equal(stream, again)


def torch_equal(a: EventStream, b: EventStream) -> bool:
    return (
        np.array_equal(a.src, b.src)
        and np.array_equal(a.dst, b.dst)
        and np.array_equal(a.t, b.t)
        and np.array_equal(a.feat, b.feat)
        and np.array_equal(a.raw_ids, b.raw_ids)
    )


def test_cache_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOTACACHE" + b"\x00" * 64)
    with pytest.raises(StreamError, match="magic"):
        load_stream(path)


def test_stream_invariant_violations():
    with pytest.raises(StreamError):
        EventStream(
            src=np.array([0]), dst=np.array([5]), t=np.array([0.0]),
            feat=np.zeros((1, 0), np.float32), label=None, num_nodes=3,
        )
    with pytest.raises(StreamError):
        EventStream(
            src=np.array([0, 1]), dst=np.array([1, 0]), t=np.array([2.0, 1.0]),
            feat=np.zeros((2, 0), np.float32), label=None, num_nodes=2,
        )


def test_stream_arrays_immutable():
    stream = make_stream(seed=1)
    with pytest.raises(ValueError):
        stream.src[0] = 5


def test_split_positions_70_15_15():
    stream = make_stream(seed=2, n_events=100)
    split = chronological_split(stream)
    assert (len(split.train), len(split.val), len(split.test)) == (70, 15, 15)


def test_split_inductive_zero_is_identity():
    stream = make_stream(seed=4, n_events=80)
    split = chronological_split(stream, inductive_frac=0.0)
    assert split.inductive_nodes == frozenset()
    assert len(split.train) == 56


def test_split_duplicate_timestamps_at_boundary():
    # 20 events sharing a handful of timestamps straddling the 70% boundary.
    t = np.repeat([0.0, 1.0, 2.0, 3.0], 5)
    stream = stream_from_pairs([(i % 4, (i + 1) % 4) for i in range(20)], t=t, n_nodes=4)
    split = chronological_split(stream)
    assert split.train.t[-1] <= split.val.t[0] <= split.val.t[-1] <= split.test.t[0]
    assert len(split.train) + len(split.val) + len(split.test) == 20


def test_split_empty_segment_errors():
    stream = make_stream(seed=5, n_events=3)
    with pytest.raises(StreamError):
        chronological_split(stream)


def test_split_bad_ratios():
    stream = make_stream(seed=5, n_events=50)
    with pytest.raises(ConfigError):
        chronological_split(stream, ratios=(0.5, 0.2, 0.2))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), frac=st.floats(0.0, 0.5), split_seed=st.integers(0, 100))
def test_split_properties_random(seed, frac, split_seed):
    stream = make_stream(seed=seed, n_nodes=25, n_events=60)
    split = chronological_split(stream, inductive_frac=frac, seed=split_seed)
    # chronological: no later timestamp in an earlier segment
    assert split.train.t[-1] <= split.val.t[0]
    assert split.val.t[-1] <= split.test.t[0]
    # withheld nodes never appear in train
    train_nodes = set(split.train.src.tolist()) | set(split.train.dst.tolist())
    assert not (split.inductive_nodes & train_nodes)


def test_split_inductive_removes_train_events():
    stream = make_stream(seed=9, n_nodes=12, n_events=200)
    split = chronological_split(stream, inductive_frac=0.4, seed=1)
    assert len(split.inductive_nodes) >= 1
    assert len(split.train) < 140  # some train events were discarded


def test_normalize_time_basic():
    stream = stream_from_pairs([(0, 1), (0, 1), (0, 1)], t=[0.0, 2.0, 4.0])
    normalized = normalize_time(stream, train_frac=1.0)
    np.testing.assert_allclose(normalized.t, [0.0, 0.5, 1.0])


def test_normalize_time_round_trip():
    stream = make_stream(seed=7, n_events=150, t_span=5_000.0)
    normalized = normalize_time(stream)
    assert normalized.t[: int(0.7 * 150)].max() <= 1.0
    back = denormalize_time(normalized)
    np.testing.assert_allclose(back.t, stream.t, atol=1e-12 * stream.t.max())


def test_normalize_time_degenerate_warns():
    stream = stream_from_pairs([(0, 1)], t=[0.0])
    with pytest.warns(UserWarning, match="timestamp"):
        normalized = normalize_time(stream)
    assert normalized.t[0] == 0.0


def test_split_type_rejects_leaky_inductive_set():
    stream = make_stream(seed=11, n_events=60)
    split = chronological_split(stream)
    leaky = set(split.train.src.tolist()[:1])
    with pytest.raises(StreamError, match="leak"):
        Split(train=split.train, val=split.val, test=split.test, inductive_nodes=frozenset(leaky))
