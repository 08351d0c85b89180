import numpy as np
import pytest

from sta_thermalizer import ProtocolSpec, ThermalEndpoint, synthesize_schedule
from sta_thermalizer.dynamics import integrate_consistency

# (omega_f, beta_f, t_f) reached from omega_0 = beta_0 = 1
REFERENCE_PROTOCOLS = ((3.0, 2.0, 2.0), (3.0, 2.0, 6.0), (0.25, 2.0, 2.0), (0.25, 2.0, 6.0))


def make_spec(omega_f, beta_f, t_f, n_steps=4000, omega_0=1.0, beta_0=1.0, **kw):
    return ProtocolSpec(ThermalEndpoint(omega_0, beta_0), ThermalEndpoint(omega_f, beta_f), t_f, n_steps, **kw)


class ConstantDrive:
    """Duck-typed schedule with time-independent controls."""

    def __init__(self, omega_sq, gamma, t_f, start=ThermalEndpoint(1.0, 1.0), n_steps=4000):
        self.spec = ProtocolSpec(start, start, t_f, n_steps)
        self.t_f = t_f
        self.w2 = omega_sq
        self.g = gamma

    def controls_at(self, t):
        t = np.asarray(t, dtype=float)
        return np.full(t.shape, float(self.w2)), np.full(t.shape, float(self.g))


@pytest.fixture(scope="session")
def propagated():
    """Schedule and consistency trajectory for each reference protocol."""
    out = {}
    for w, b, tf in REFERENCE_PROTOCOLS:
        spec = make_spec(w, b, tf)
        sch = synthesize_schedule(spec)
        out[(w, b, tf)] = (spec, sch, integrate_consistency(sch, spec.initial))
    return out
