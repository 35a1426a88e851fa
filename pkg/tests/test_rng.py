import numpy as np
import pytest

from voteboost.errors import DomainError
from voteboost.rng import RandomSource


def test_same_source_reproduces_draws():
    a = RandomSource(123).generator().random(8)
    b = RandomSource(123).generator().random(8)
    assert np.array_equal(a, b)


def test_generator_is_fresh_each_call():
    src = RandomSource(123)
    assert np.array_equal(src.generator().random(4), src.generator().random(4))


def test_different_seeds_differ():
    a = RandomSource(1).generator().random(8)
    b = RandomSource(2).generator().random(8)
    assert not np.array_equal(a, b)


def test_derive_is_deterministic_and_key_sensitive():
    src = RandomSource(7)
    assert src.derive(3, "x") == src.derive(3, "x")
    assert src.derive(1, 2) != src.derive(2, 1)
    assert src.derive("a") != src.derive("b")
    assert src.derive(0) != src.derive(0, 0)
    # derived stream draws differ from the parent's
    assert not np.array_equal(
        src.generator().random(4), src.derive(0).generator().random(4)
    )


def test_multi_key_derive_equals_chained_derive():
    src = RandomSource(7)
    assert src.derive(1, 2) == src.derive(1).derive(2)
    assert src.derive(1, "x", 3) == src.derive(1).derive("x").derive(3)
    assert src.derive(1).derive(2) != src.derive(1).derive(3)


def test_string_and_int_keys_are_distinct_spaces():
    src = RandomSource(7)
    assert src.derive("1") != src.derive(1)


def test_tree_seed_range_and_determinism():
    src = RandomSource(99).derive("t")
    s1 = src.tree_seed()
    s2 = src.tree_seed()
    assert s1 == s2
    assert 0 <= s1 < (1 << 63)
    seeds = {RandomSource(99).derive(i).tree_seed() for i in range(64)}
    assert len(seeds) == 64


def test_master_seed_validation():
    with pytest.raises(DomainError):
        RandomSource(-1)
    with pytest.raises(DomainError):
        RandomSource(1 << 64)
    RandomSource((1 << 64) - 1)  # max value allowed


def test_key_validation():
    src = RandomSource(0)
    with pytest.raises(DomainError):
        src.derive(True)
    with pytest.raises(DomainError):
        src.derive(-3)
    with pytest.raises(DomainError):
        src.derive(1.5)


def test_source_is_hashable_value_type():
    assert RandomSource(5, 0) == RandomSource(5, 0)
    assert len({RandomSource(5).derive(i) for i in range(10)}) == 10
