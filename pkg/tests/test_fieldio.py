import numpy as np
import pytest

from bogotool.fieldio import read_binary, read_csv, write_binary, write_csv
from bogotool.grid import UniformGrid, UniformGridField


@pytest.mark.parametrize("rank", [0, 1, 2])
def test_csv_round_trip(tmp_path, rank):
    g = UniformGrid((0.25, -1.0), 0.5, (3, 4))
    vals = np.random.default_rng(rank).normal(size=g.dims + (2,) * rank)
    write_csv(UniformGridField(g, vals), tmp_path / "f.csv")
    back = read_csv(tmp_path / "f.csv")
    assert back.grid.dims == g.dims
    assert np.allclose(back.grid.origin, g.origin) and back.grid.spacing == pytest.approx(0.5)
    assert np.array_equal(back.values, vals)


@pytest.mark.parametrize("rank", [0, 1, 2])
def test_binary_round_trip(tmp_path, rank):
    g = UniformGrid((0.0, 0.0, 0.0), 0.1, (2, 3, 4))
    vals = np.random.default_rng(rank).normal(size=g.dims + (3,) * rank)
    write_binary(UniformGridField(g, vals), tmp_path / "f.bin")
    back = read_binary(tmp_path / "f.bin")
    assert back.grid.dims == g.dims and back.grid.spacing == 0.1
    assert np.array_equal(back.values, vals)
    shifted = read_binary(tmp_path / "f.bin", origin=(1.0, 2.0, 3.0))
    assert shifted.grid.origin == (1.0, 2.0, 3.0)


def test_binary_header_layout(tmp_path):
    g = UniformGrid((0.0,), 0.5, (2,))
    write_binary(UniformGridField(g, np.array([1.0, 2.0])), tmp_path / "f.bin")
    raw = (tmp_path / "f.bin").read_bytes()
    assert len(raw) == 8 + 8 + 8 + 8 + 16
    assert np.frombuffer(raw[32:], "<f8").tolist() == [1.0, 2.0]
