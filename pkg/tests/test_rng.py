import numpy as np
import pytest

from evpv.rng import stream


def test_same_key_same_numbers():
    np.testing.assert_array_equal(stream(1, "a", 3).random(5), stream(1, "a", 3).random(5))


@pytest.mark.parametrize("other", [(2, "a", 3), (1, "b", 3), (1, "a", 4), (1, "a")])
def test_different_keys_differ(other):
    assert not np.array_equal(stream(1, "a", 3).random(5), stream(*other).random(5))


def test_negative_integer_tag_rejected():
    with pytest.raises(ValueError):
        stream(0, -1)
