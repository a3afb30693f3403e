import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from permstat import models
from permstat.partitions import h_oracle
from permstat.series import compute_h

ZETA2 = 1.6449340668482264


def test_ewens_examples():
    assert np.allclose(compute_h(models.ewens(1), 30).h, 1.0)
    assert compute_h(models.ewens(2), 3).h[3] == pytest.approx(4.0)
    assert compute_h(models.ewens(0.5), 1).h[1] == pytest.approx(0.5)
    assert models.ewens(3).constant == 3.0


def test_geometric_examples():
    theta = models.geometric_ewens(1, 0.5)
    h = compute_h(theta, 2).h
    assert h[1] == pytest.approx(0.5)
    assert h[2] == pytest.approx(0.25)
    assert h[2] == pytest.approx(h_oracle(theta, 2))
    assert theta.radius == pytest.approx(2.0)


def test_geometric_log_weights_survive_underflow():
    theta = models.geometric_ewens(1, 0.5)
    logs = theta.log_values(3000)
    assert logs[-1] == pytest.approx(-3000 * math.log(2))
    assert np.all(theta.values(3000) >= 0)


def test_perturbed_examples():
    base = models.ewens(1.7).values(50)
    assert np.array_equal(models.perturbed_ewens(1.7, 0.0, 0.5).values(50), base)
    theta = models.perturbed_ewens(1, 1, 1)
    assert theta(2) == pytest.approx(1.5)
    assert complex(theta.descriptor.g0_at_r).real == pytest.approx(ZETA2, rel=1e-12)


@given(st.floats(1.05, 4.0))
def test_zeta_tail_sum_against_mpmath(s):
    import mpmath

    value, err = models.zeta_tail_sum(s)
    assert abs(value - float(mpmath.zeta(s))) <= max(10 * err, 1e-13 * value)


def test_closed_form_g_matches_series():
    for theta in (models.ewens(1.3), models.geometric_ewens(2, 0.4), models.perturbed_ewens(1, 0.5, 0.7)):
        z = 0.3 * theta.radius * complex(math.cos(1.0), math.sin(1.0))
        k = np.arange(1, 400)
        direct = np.sum(theta.values(399) / k * z**k)
        assert abs(theta.g(z) - direct) < 1e-10


def test_parse_model_forms():
    assert models.parse_model("ewens:2").constant == 2.0
    assert models.parse_model("geom:1,0.5").radius == 2.0
    assert models.parse_model("perturbed:1,1,1").descriptor.class_tag == models.CLASS_EF
    t = models.parse_model("table:1,2,3")
    assert t(5) == 3.0 and t.descriptor is None
    for bad in ("ewens", "ewens:1,2", "geom:1", "foo:1", "ewens:-1", "geom:1,1.5", "perturbed:1,1,2"):
        with pytest.raises(ValueError):
            models.parse_model(bad)


def test_descriptor_validation():
    with pytest.raises(ValueError):
        models.SingularityDescriptor("G", r=1.0)
    with pytest.raises(ValueError):
        models.SingularityDescriptor(models.CLASS_EF, r=1.0, vartheta=1.0, gamma=0.5)
    b = models.Branch(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        models.SingularityDescriptor.multi([b, b])


def test_missing_descriptor_refused():
    with pytest.raises(ValueError, match="refused"):
        models.table_sequence([1.0]).require_descriptor()
