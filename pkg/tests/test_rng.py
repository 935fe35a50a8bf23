import numpy as np

from fedtoken.rng import RngStream


def test_identical_keys_yield_identical_sequences():
    a = RngStream(42, round=3, client=7, purpose="x").generator().random(32)
    b = RngStream(42, round=3, client=7, purpose="x").generator().random(32)
    assert np.array_equal(a, b)


def test_any_scope_label_changes_the_stream():
    base = RngStream(42, round=1, client=1, purpose="p")
    ref = base.generator().random(16)
    for other in (base.scoped(round=2), base.scoped(client=2),
                  base.scoped(purpose="q"), RngStream(43, 1, 1, "p")):
        assert not np.array_equal(ref, other.generator().random(16))


def test_scoped_only_replaces_given_labels():
    s = RngStream(1, round=2, client=3, purpose="a").scoped(client=9)
    assert (s.root_seed, s.round, s.client, s.purpose) == (1, 2, 9, "a")


def test_generator_restarts_from_scratch():
    s = RngStream(7, purpose="restart")
    first = s.generator().random(8)
    again = s.generator().random(8)
    assert np.array_equal(first, again)
