import numpy as np
import pytest

from obsbandit.rng import Purpose, Stream


class TestStream:
    def test_same_address_same_draws(self):
        a = Stream(5, (1, 2)).generator(3, Purpose.CONTEXT).standard_normal(8)
        b = Stream(5, (1, 2)).generator(3, Purpose.CONTEXT).standard_normal(8)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize(
        "other",
        [
            (Stream(6, (1, 2)), 3, Purpose.CONTEXT),
            (Stream(5, (1, 3)), 3, Purpose.CONTEXT),
            (Stream(5, (1, 2)), 4, Purpose.CONTEXT),
            (Stream(5, (1, 2)), 3, Purpose.REWARD_NOISE),
        ],
    )
    def test_any_coordinate_changes_draws(self, other):
        base = Stream(5, (1, 2)).generator(3, Purpose.CONTEXT).standard_normal(8)
        stream, rnd, purpose = other
        assert not np.array_equal(base, stream.generator(rnd, purpose).standard_normal(8))

    def test_child_equals_explicit_path(self):
        a = Stream(9, (1,)).child(2, 3).generator().random(4)
        b = Stream(9, (1, 2, 3)).generator().random(4)
        np.testing.assert_array_equal(a, b)

    def test_rewound_draws_match_fresh_generator(self):
        s = Stream(3, (4,))
        for rnd, purpose in [(1, 0), (7, 2), (1, 0)]:
            np.testing.assert_array_equal(
                s.standard_normal(rnd, purpose, (5, 3)), s.generator(rnd, purpose).standard_normal((5, 3))
            )

    def test_order_independence(self):
        s = Stream(3, (4,))
        late_first = s.standard_normal(10, 1, 6)
        s.standard_normal(2, 1, 100)
        np.testing.assert_array_equal(late_first, Stream(3, (4,)).standard_normal(10, 1, 6))

    def test_negative_seed(self):
        with pytest.raises(ValueError):
            Stream(-1)

    def test_large_seed(self):
        Stream(2**64 - 1).generator().random()

    def test_roughly_standard(self):
        x = Stream(1).generator(0, Purpose.VERIFY).standard_normal(200_000)
        assert abs(x.mean()) < 0.01
        assert abs(x.var() - 1.0) < 0.02
