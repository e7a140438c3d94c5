import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qclocksync.estimation import golden_section_max, periodic_argmax
from qclocksync.rng import as_generator, substream


def test_substreams_reproducible_and_distinct():
    a = substream(7, "qcs").random(5)
    assert np.array_equal(a, substream(7, "qcs").random(5))
    assert not np.array_equal(a, substream(7, "sct").random(5))
    assert not np.array_equal(a, substream(7, "qcs", 1).random(5))
    assert not np.array_equal(a, substream(8, "qcs").random(5))


def test_as_generator_passthrough():
    g = np.random.default_rng(0)
    assert as_generator(g, "x") is g
    assert np.array_equal(as_generator(3, "x").random(3), substream(3, "x").random(3))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 6.0))
def test_periodic_argmax_cosine(peak):
    got = periodic_argmax(lambda x: np.cos(np.asarray(x) - peak), 2 * math.pi)
    assert abs(math.remainder(got - peak, 2 * math.pi)) < 1e-6


def test_golden_section_parabola():
    assert golden_section_max(lambda x: -(x - 0.3) ** 2, 0.0, 1.0, 1e-10) == pytest.approx(0.3, abs=1e-8)
