import numpy as np

from crossprompt.numeric import Rng


def test_same_seed_same_draws():
    np.testing.assert_array_equal(Rng(5).normal((4, 3)), Rng(5).normal((4, 3)))


def test_different_seeds_differ():
    assert not np.array_equal(Rng(5).normal((8,)), Rng(6).normal((8,)))


def test_child_streams_do_not_depend_on_parent_draws():
    a = Rng(9)
    a.normal((100,))
    b = Rng(9)
    np.testing.assert_array_equal(a.child("task", 2).normal((5,)), b.child("task", 2).normal((5,)))


def test_child_keys_select_independent_streams():
    rng = Rng(9)
    assert not np.array_equal(rng.child("task", 0).normal((5,)), rng.child("task", 1).normal((5,)))
    assert not np.array_equal(rng.child("prompts").normal((5,)), rng.child("batches").normal((5,)))


def test_nested_children_equal_flat_keys():
    rng = Rng(3)
    np.testing.assert_array_equal(
        rng.child("a").child(1).uniform((3,)), rng.child("a", 1).uniform((3,))
    )


def test_choice_without_replacement_is_unique():
    drawn = Rng(0).choice(24, 10)
    assert len(set(drawn.tolist())) == 10


def test_keys_sharing_a_long_prefix_differ():
    rng = Rng(4)
    a = rng.child("prompts_a").normal((5,))
    assert not np.array_equal(a, rng.child("prompts_b").normal((5,)))
