import pytest

from smpde.seeding import seed_split


def test_deterministic():
    assert seed_split(42, 7) == seed_split(42, 7)
    assert seed_split(42, "measure") == seed_split(42, "measure")
    assert seed_split(42, ("a", 1)) == seed_split(42, ("a", 1))


def test_streams_differ():
    assert seed_split(42, 0) != seed_split(42, 1)
    assert seed_split(42, 0) != seed_split(43, 0)
    assert seed_split(42, "0") != seed_split(42, 0)


def test_collision_sweep():
    seen = {seed_split(123, i) for i in range(1_000_000)}
    assert len(seen) == 1_000_000


def test_rejects_unhashable_types():
    with pytest.raises(TypeError):
        seed_split(1, 3.5)
    with pytest.raises(TypeError):
        seed_split(1, True)
