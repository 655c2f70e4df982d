import numpy as np
import pytest

from countcurv.complex import build_complex
from countcurv.errors import FormatError, InvalidComplex
from countcurv.io import (MAGIC, load_complex, read_binary, read_text, save_complex,
                          write_binary, write_text)
from countcurv.lattice import LatticeSpec, generate_l1_lattice


def same(a, b):
    assert np.array_equal(a.indptr, b.indptr)
    assert np.array_equal(a.indices, b.indices)
    for k in ("weights", "positions"):
        x, y = getattr(a, k), getattr(b, k)
        assert (x is None) == (y is None)
        if x is not None:
            assert np.array_equal(x, y)
    assert a.mesh_scale == b.mesh_scale


@pytest.fixture
def weighted():
    base = generate_l1_lattice(LatticeSpec(2, 3))
    rng = np.random.default_rng(3)
    return build_complex(base.adjacency_lists(), weights=rng.uniform(0.1, 2.0, base.cell_count),
                         positions=base.positions * 0.1 + 1 / 3, mesh_scale=0.1)


@pytest.mark.parametrize("writer,reader", [(write_text, read_text), (write_binary, read_binary)])
def test_roundtrip(tmp_path, weighted, writer, reader):
    p = tmp_path / "cx"
    writer(weighted, p)
    same(weighted, reader(p))


def test_bare_complex_roundtrip(tmp_path):
    cx = build_complex([[1], [0, 2], [1], []])
    for name in ("a.txt", "a.ccx"):
        save_complex(cx, tmp_path / name)
        same(cx, load_complex(tmp_path / name))


def test_binary_magic_and_determinism(tmp_path, weighted):
    write_binary(weighted, tmp_path / "a")
    write_binary(weighted, tmp_path / "b")
    raw = (tmp_path / "a").read_bytes()
    assert raw[:4] == MAGIC
    assert raw == (tmp_path / "b").read_bytes()


def test_text_determinism(tmp_path, weighted):
    write_text(weighted, tmp_path / "a")
    write_text(weighted, tmp_path / "b")
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_bad_magic(tmp_path):
    p = tmp_path / "bad"
    p.write_bytes(b"XXXX" + b"\0" * 64)
    with pytest.raises(FormatError):
        read_binary(p)


def test_truncated_binary(tmp_path, weighted):
    write_binary(weighted, tmp_path / "a")
    raw = (tmp_path / "a").read_bytes()
    (tmp_path / "t").write_bytes(raw[:-9])
    with pytest.raises(FormatError):
        read_binary(tmp_path / "t")


def test_malformed_text(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("cells 2 dim 0 scale -\n0 - 1 1\n1 - 1 7\n")
    with pytest.raises(InvalidComplex):
        read_text(p)
    p.write_text("hello\n")
    with pytest.raises(FormatError):
        read_text(p)
