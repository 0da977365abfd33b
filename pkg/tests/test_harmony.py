import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dimsim import harmony
from dimsim.harmony import (
    TABLE_4WAY,
    HarmonyMatrix,
    MatrixFormatError,
    generate_harmony,
    index_maneuver,
    maneuver_index,
    table_4way,
)
from dimsim.topology import InvalidGeometry, Maneuver, all_maneuvers


def test_canonical_table_is_symmetric_with_zero_diagonal():
    H = table_4way()
    assert H.is_symmetric()
    assert not np.diag(H.entries).any()


def test_generator_reproduces_canonical_table():
    assert generate_harmony(4) == table_4way()


@pytest.mark.parametrize("n", [3, 4, 5, 6, 7])
def test_generated_structure(n):
    H = generate_harmony(n)
    assert H.entries.shape == (n * (n - 1),) * 2
    assert H.is_symmetric()
    mans = all_maneuvers(n)
    for a in mans:
        for b in mans:
            if a.entry == b.entry:
                assert not harmony.harmony(a, b, H)


def test_lookups():
    H = table_4way()
    va1, vb2, vc2 = Maneuver.parse("Va1"), Maneuver.parse("Vb2"), Maneuver.parse("Vc2")
    assert H(va1, vb2)
    assert not H(vb2, vc2)
    assert harmony.harmony(va1, Maneuver.parse("Vb3"), H) == bool(TABLE_4WAY[0][5])


def test_illegal_maneuver_lookup_raises_index_error():
    with pytest.raises(IndexError):
        harmony.harmony(Maneuver(0, 4), Maneuver(1, 1), table_4way())
    with pytest.raises(IndexError):
        index_maneuver(12, 4)


@given(st.integers(3, 8).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n * (n - 1) - 1))))
def test_index_round_trip(args):
    n, idx = args
    assert maneuver_index(index_maneuver(idx, n), n) == idx


def test_generate_rejects_small_n():
    with pytest.raises(InvalidGeometry):
        generate_harmony(2)


def test_bad_shapes_and_values():
    with pytest.raises(InvalidGeometry):
        HarmonyMatrix(4, np.zeros((6, 6)))
    with pytest.raises(ValueError):
        HarmonyMatrix(3, np.full((6, 6), 2))


def test_matrix_is_read_only():
    H = table_4way()
    with pytest.raises(ValueError):
        H.entries[0, 0] = 1


@pytest.mark.parametrize("n", [3, 4, 5])
def test_text_round_trip(n, tmp_path):
    H = generate_harmony(n)
    path = tmp_path / "h.txt"
    harmony.save(H, path)
    assert harmony.load(path) == H
    text = path.read_text()
    assert text.splitlines()[0] == f"n={n}"
    assert text.splitlines()[1].split()[1] == "Va1"


@pytest.mark.parametrize("mutate", [
    lambda lines: lines[1:],
    lambda lines: [lines[0]] + [lines[1].replace("Va2", "Vx2")] + lines[2:],
    lambda lines: lines[:2] + [lines[2].replace("0", "7", 1)] + lines[3:],
    lambda lines: lines[:-1],
    lambda lines: ["n=two"] + lines[1:],
])
def test_malformed_text_rejected(mutate):
    lines = harmony.dumps(table_4way()).splitlines()
    with pytest.raises(MatrixFormatError):
        harmony.loads("\n".join(mutate(lines)))


@settings(max_examples=30)
@given(st.integers(3, 5), st.data())
def test_symmetric_random_matrices_round_trip(n, data):
    size = n * (n - 1)
    bits = data.draw(st.lists(st.booleans(), min_size=size * size, max_size=size * size))
    arr = np.array(bits, dtype=np.uint8).reshape(size, size)
    arr = np.triu(arr, 1)
    arr = arr | arr.T
    H = HarmonyMatrix(n, arr)
    assert harmony.loads(harmony.dumps(H)) == H
