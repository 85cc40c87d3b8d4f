import numpy as np
import pytest

from oflc.machine import MachineParams

# reference machine used throughout the tests:
# eta = 2/3, mu = 0.01 s
P0 = MachineParams(R=0.5, L_d=3e-3, L_q=5e-3, psi=0.1, p=4)

# non-salient variant (L_d = L_q)
P_NS = MachineParams(R=0.5, L_d=4e-3, L_q=4e-3, psi=0.1, p=4)

V_MAX = 48.0


@pytest.fixture
def p0():
    return P0


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_state(rng, params, i_range=20.0, omega_range=300.0):
    """Random (i, omega) away from the degenerate-b manifold."""
    from oflc.linearization import EPS_B, compute_terms

    while True:
        i = rng.uniform(-i_range, i_range, 2)
        omega = rng.uniform(-omega_range, omega_range)
        try:
            terms = compute_terms(i, omega, params)
        except Exception:
            continue
        if np.sqrt(terms.b_norm_sq) > 1e-2:
            return i, omega, terms
