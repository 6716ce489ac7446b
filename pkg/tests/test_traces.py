import numpy as np
import pytest

from opticache.core import LibraryConfig
from opticache.traces import (
    TraceParseError,
    TraceSpec,
    assign_sizes,
    convert_ratings,
    generate,
    generate_arrays,
    load_trace_csv,
    parse_trace,
    zipf_probabilities,
)


def test_zipf_probabilities_exact():
    assert np.allclose(zipf_probabilities(3, 1.0), [6 / 11, 3 / 11, 2 / 11])


def test_zipf_frequencies():
    spec = TraceSpec("zipf", 3, 100_000, alpha=1.0)
    files, users = generate_arrays(spec, np.random.default_rng(0))
    assert users is None
    freq = np.bincount(files, minlength=3) / spec.horizon
    assert np.allclose(freq, [6 / 11, 3 / 11, 2 / 11], atol=0.01)


def test_uniform_frequencies():
    spec = TraceSpec("uniform_lb", 4, 100_000)
    files, _ = generate_arrays(spec, np.random.default_rng(1))
    freq = np.bincount(files, minlength=4) / spec.horizon
    assert np.allclose(freq, 0.25, atol=0.01)


def test_replay_determinism():
    spec = TraceSpec("zipf", 50, 2000, alpha=0.8, seed=42)
    a, _ = generate_arrays(spec)
    b, _ = generate_arrays(spec)
    assert np.array_equal(a, b)


def test_generate_yields_events_with_slots_from_one():
    spec = TraceSpec("uniform_lb", 5, 10, seed=3)
    events = list(generate(spec))
    assert [e.slot for e in events] == list(range(1, 11))
    assert all(e.user is None for e in events)


def test_bipartite_users_drawn_when_requested():
    spec = TraceSpec("uniform_lb", 5, 1000, n_users=3, seed=4)
    files, users = generate_arrays(spec)
    assert users is not None and users.min() >= 0 and users.max() <= 2


class TestCsv:
    def test_replay_order_and_multiplicity(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("# demo\nslot,file_id\n\n0,12\n1,7\n2,7\n")
        files, users = load_trace_csv(path)
        assert files.tolist() == [12, 7, 7]
        assert users is None

    def test_user_column(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("slot,file_id,user_id\n0,1,0\n1,2,1\n")
        files, users = load_trace_csv(path)
        assert files.tolist() == [1, 2]
        assert users.tolist() == [0, 1]

    def test_error_carries_line_number(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("slot,file_id\n0,12\n1,oops\n")
        with pytest.raises(TraceParseError) as err:
            load_trace_csv(path)
        assert err.value.line_no == 3

    def test_missing_header(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("0,12\n")
        with pytest.raises(TraceParseError):
            load_trace_csv(path)

    def test_csv_spec_horizon(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("slot,file_id\n0,3\n1,1\n2,0\n")
        spec = TraceSpec("csv", 4, 2, path=str(path))
        files, _ = generate_arrays(spec, np.random.default_rng(0))
        assert files.tolist() == [3, 1]
        with pytest.raises(ValueError):
            generate_arrays(TraceSpec("csv", 4, 9, path=str(path)),
                            np.random.default_rng(0))


class TestAssignSizes:
    def test_all_ones(self):
        s = assign_sizes(5, 1, 1, np.random.default_rng(0))
        assert np.all(s == 1.0)

    def test_uniform_integer_sizes(self):
        s = assign_sizes(100_000, 1, 10, np.random.default_rng(1))
        assert np.all(s == np.round(s))
        freq = np.bincount(s.astype(int), minlength=11)[1:] / s.shape[0]
        assert np.allclose(freq, 0.1, atol=0.01)

    def test_oversized_files_rejected_by_library(self):
        s = assign_sizes(10, 1, 10, np.random.default_rng(2))
        with pytest.raises(ValueError):
            LibraryConfig(10, 5, sizes=s)  # hi > C must be rejected

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            assign_sizes(3, 0, 5, np.random.default_rng(0))
        with pytest.raises(ValueError):
            assign_sizes(3, 4, 2, np.random.default_rng(0))


def test_convert_ratings(tmp_path):
    src = tmp_path / "ratings.csv"
    # out of order timestamps; items re-indexed by first occurrence after sort
    src.write_text(
        "user,item,rating,timestamp\n"
        "u9,m30,4.0,300\n"
        "u1,m10,5.0,100\n"
        "u2,m20,3.0,200\n"
        "u1,m10,2.0,400\n"
    )
    dst = tmp_path / "trace.csv"
    n = convert_ratings(src, dst)
    assert n == 4
    files, users = load_trace_csv(dst)
    # chronological: m10, m20, m30, m10 -> ids 0, 1, 2, 0
    assert files.tolist() == [0, 1, 2, 0]
    assert users.tolist() == [0, 1, 2, 0]


def test_parse_trace_grammar():
    spec = parse_trace("zipf:0.8", 100, 50)
    assert (spec.kind, spec.alpha) == ("zipf", 0.8)
    assert parse_trace("uniform_lb", 10, 5).kind == "uniform_lb"
    assert parse_trace("csv:/tmp/x.csv", 10, 5).path == "/tmp/x.csv"
    with pytest.raises(ValueError):
        parse_trace("poisson:2", 10, 5)


def test_spec_validation():
    with pytest.raises(ValueError):
        TraceSpec("zipf", 10, 0, alpha=1.0)
    with pytest.raises(ValueError):
        TraceSpec("zipf", 10, 5, alpha=-1.0)
    with pytest.raises(ValueError):
        TraceSpec("csv", 10, 5)
