"""Shared fixtures: models and cached spectral data for the test session."""
import numpy as np
import pytest

import isopulse as ip
from isopulse.dynamics import Box, OrthantOrder, VectorFieldModel


def scalar_relax_field(x, p, u):
    # xdot = -x + u, one parameter slot (unused)
    return np.array([-x[0] + u[0]])


def linear_diag_field(x, p, u):
    # decoupled stable modes with rates -1 and -3
    return np.array([-x[0], -3.0 * x[1]])


def rotation_field(x, p, u):
    # complex pair -1 +/- i
    return np.array([-x[0] + x[1], -x[1] - x[0]])


def make_scalar_model():
    return VectorFieldModel(
        name="scalar_relax", state_dim=1, param_dim=1, input_dim=1,
        field=scalar_relax_field,
        state_order=OrthantOrder((1,)), param_order=OrthantOrder((1,)),
        input_order=OrthantOrder((1,)),
        state_domain=Box([-1e6], [1e6]))


def make_linear_model():
    return VectorFieldModel(
        name="linear_diag", state_dim=2, param_dim=1, input_dim=1,
        field=linear_diag_field,
        state_order=OrthantOrder((1, 1)), param_order=OrthantOrder((1,)),
        input_order=OrthantOrder((1,)),
        state_domain=Box([-1e6, -1e6], [1e6, 1e6]))


def make_rotation_model():
    return VectorFieldModel(
        name="rotation", state_dim=2, param_dim=1, input_dim=1,
        field=rotation_field,
        state_order=OrthantOrder((1, 1)), param_order=OrthantOrder((1,)),
        input_order=OrthantOrder((1,)),
        state_domain=Box([-1e6, -1e6], [1e6, 1e6]))


@pytest.fixture(scope="session")
def toggle():
    return ip.toggle_switch_model()


@pytest.fixture(scope="session")
def scalar_model():
    return make_scalar_model()


@pytest.fixture(scope="session")
def linear_model():
    return make_linear_model()


class ToggleData:
    """Equilibria and spectral data for one parameter vector, cached."""

    def __init__(self, model, q):
        self.q = np.asarray(q, float)
        self.low, self.high = ip.stable_extremes(model, self.q)
        self.spec = ip.dominant_spectrum(model, self.q, self.high)
        self.spec_low = ip.dominant_spectrum(model, self.q, self.low)
        self.lap = ip.LaplaceOptions(other_equilibria=(self.low,))
        self.lap_low = ip.LaplaceOptions(other_equilibria=(self.high,))


@pytest.fixture(scope="session")
def tg_int(toggle):
    return ToggleData(toggle, ip.TOGGLE_Q_INT)


@pytest.fixture(scope="session")
def tg_min(toggle):
    return ToggleData(toggle, ip.TOGGLE_Q_MIN)


@pytest.fixture(scope="session")
def tg_max(toggle):
    return ToggleData(toggle, ip.TOGGLE_Q_MAX)


@pytest.fixture(scope="session")
def case_box():
    return ip.BoxConstraint([4.0, 4.0], [10.0, 10.0])


@pytest.fixture(scope="session")
def anchor_table(toggle, case_box, tg_min, tg_max):
    # one table for the whole session; delta targets the deep isostable
    # just beyond the box-face eigenfunction values
    return ip.precompute_boundary_pulses(
        toggle, ip.TOGGLE_Q_MIN, ip.TOGGLE_Q_MAX, case_box, delta=1e-5,
        n_anchors=16, xi_upper=10.0,
        spec_upper=tg_min.spec, spec_lower=tg_max.spec_low)
