import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from exclusim.errors import InfeasibleSpec, WrongModelKind
from exclusim.velocity import (
    Constant,
    Discrete,
    LogisticMap,
    Periodic,
    Uniform,
    VelocityModel,
    capped_mean,
    constant_model,
    sample_step,
    symmetric_capped_mean,
)

PERIODIC = VelocityModel(1.0, "deterministic", Periodic((1.0, -1.0)), signed=True)


def test_constant_sample():
    assert sample_step(constant_model(1.0), 5, 3).tolist() == [1, 1, 1]


def test_periodic_indexing():
    assert np.all(sample_step(PERIODIC, 0, 4) == 1)
    assert np.all(sample_step(PERIODIC, 1, 4) == -1)


def test_iid_replay():
    m = VelocityModel(1.0, "iid", Uniform(0.0, 1.0), seed=9)
    a = sample_step(m, 3, 4)
    assert np.all((a >= 0) & (a <= 1))
    assert np.array_equal(a, sample_step(m, 3, 4))
    assert not np.array_equal(a, sample_step(m, 4, 4))
    assert not np.array_equal(a, sample_step(m, 3, 4, stream=1))


def test_iid_prefix_stable():
    # the draw of particle i does not depend on how many particles exist
    m = VelocityModel(1.0, "iid", Uniform(0.0, 1.0), seed=2)
    assert np.array_equal(sample_step(m, 0, 3), sample_step(m, 0, 5)[:3])


def test_discrete_support():
    m = VelocityModel(2.0, "iid", Discrete((0.0, 2.0), (1.0, 3.0)), seed=1)
    vals = np.concatenate([sample_step(m, t, 100) for t in range(20)])
    assert set(vals.tolist()) <= {0.0, 2.0}
    assert 0.65 < np.mean(vals == 2.0) < 0.85


def test_logistic_orbit():
    m = VelocityModel(2.0, "deterministic", LogisticMap(0.5))
    assert m.common_value(0) == 0.5
    assert m.common_value(1) == pytest.approx(2 * 4 * 0.25 * 0.75)


def test_capped_mean_examples():
    assert capped_mean(constant_model(1.0), 0.5, 7) == 0.5
    assert capped_mean(PERIODIC, 0.5, 2) == -0.25
    assert capped_mean(constant_model(0.3), 2.0, 5) == 0.3
    assert symmetric_capped_mean(PERIODIC, 0.5, 2) == 0.0


def test_capped_mean_iid():
    with pytest.raises(WrongModelKind):
        capped_mean(VelocityModel(1.0, "iid", Uniform(0.0, 1.0)), 0.5, 3)


@pytest.mark.parametrize("kwargs", [
    dict(cap=1.0, kind="deterministic", source=Constant(1.5)),
    dict(cap=1.0, kind="deterministic", source=Constant(-0.5)),
    dict(cap=1.0, kind="iid", source=Periodic((1.0,))),
    dict(cap=1.0, kind="deterministic", source=Uniform(0.0, 1.0)),
    dict(cap=0.0, kind="deterministic", source=Constant(0.0)),
    dict(cap=1.0, kind="iid", source=Discrete((1.0,), (-1.0,))),
])
def test_invalid_models(kwargs):
    with pytest.raises(InfeasibleSpec):
        VelocityModel(**kwargs)


@pytest.mark.parametrize("model", [
    PERIODIC,
    VelocityModel(1.0, "iid", Discrete((0.0, 1.0), (0.5, 0.5)), seed=4),
    VelocityModel(2.0, "deterministic", LogisticMap(0.3)),
])
def test_dict_round_trip(model):
    assert VelocityModel.from_dict(model.to_dict()) == model


@given(st.integers(0, 2**31), st.integers(0, 10_000), st.integers(1, 50))
def test_iid_within_cap(seed, t, n):
    m = VelocityModel(0.7, "iid", Uniform(0.0, 0.7), seed=seed)
    v = sample_step(m, t, n)
    assert v.shape == (n,) and np.all((v >= 0) & (v <= 0.7))
