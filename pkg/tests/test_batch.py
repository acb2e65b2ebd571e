import numpy as np
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from orbitbayes.batch import SampleBatch, fmt, read_csv, read_jsonl

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(finite)
def test_fmt_round_trips(x):
    assert float(fmt(x)) == x


@given(hnp.arrays(np.float64, st.tuples(st.integers(0, 6), st.integers(1, 3)), elements=finite))
def test_csv_and_jsonl_round_trip(tmp_path_factory, draws):
    d = tmp_path_factory.mktemp("io")
    batch = SampleBatch(draws, seed=3, meta={"model": "test"})
    batch.to_csv(d / "s.csv", extra_header={"config_hash": "abc"})
    batch.to_jsonl(d / "s.jsonl", extra_header={"config_hash": "abc"})
    for reader, name in ((read_csv, "s.csv"), (read_jsonl, "s.jsonl")):
        header, back = reader(d / name)
        assert header["seed"] == 3 and header["config_hash"] == "abc"
        assert back.shape == draws.shape
        assert np.array_equal(back, draws)


def test_matrix_draws_round_trip(tmp_path):
    draws = np.arange(24.0).reshape(4, 3, 2) / 7
    SampleBatch(draws, seed=1).to_csv(tmp_path / "m.csv")
    _, back = read_csv(tmp_path / "m.csv")
    assert np.array_equal(back, draws)
