import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from cavitycool import expaction
from cavitycool.errors import NumericalError


def random_generator(seed, n):
    rng = np.random.default_rng(seed)
    lower = rng.random(n - 1) * 5
    upper = rng.random(n - 1) * 5
    diag = np.zeros(n)
    diag[:-1] -= lower
    diag[1:] -= upper
    return lower, diag, upper


def dense(lower, diag, upper):
    return np.diag(diag) + np.diag(lower, -1) + np.diag(upper, 1)


@pytest.mark.parametrize("lam", [0.0, 1e-3, 1.0, 30.0, 1e4])
def test_poisson_weights(lam):
    w = expaction.poisson_weights(lam, 1e-14)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(w >= 0)


def test_zero_generator():
    p0 = np.array([0.2, 0.8])
    out = expaction.uniformization(np.zeros(1), np.zeros(2), np.zeros(1), p0, [0.0, 1.0])
    assert out.tolist() == [p0.tolist()] * 2


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 40),
       st.sampled_from(["uniformization", "krylov"]))
def test_random_generator_matches_expm(seed, n, method):
    lo, d, up = random_generator(seed, n)
    p0 = np.full(n, 1.0 / n)
    t = np.array([0.0, 0.05, 0.4, 2.0])
    got = expaction.expm_action(lo, d, up, p0, t, method=method)
    want = np.array([sla.expm(s * dense(lo, d, up)) @ p0 for s in t])
    assert np.max(np.abs(got - want)) < 1e-9


def test_uniformization_budget():
    lo, d, up = random_generator(0, 10)
    with pytest.raises(NumericalError) as err:
        expaction.uniformization(lo, d, up, np.full(10, 0.1), [1e4], max_terms=1000)
    assert err.value.diagnostics["max_terms"] == 1000


def test_krylov_nonconvergence():
    lo, d, up = random_generator(1, 400)
    with pytest.raises(NumericalError) as err:
        expaction.krylov(lo, d, up, np.full(400, 1 / 400), np.linspace(0, 5, 20),
                         tol=1e-15, kmax=12)
    assert "last_change" in err.value.diagnostics


def test_auto_switches_to_krylov(monkeypatch):
    seen = []
    monkeypatch.setattr(expaction, "krylov", lambda *a, **k: seen.append(1) or np.zeros((1, 3)))
    lo, d, up = random_generator(2, 3)
    monkeypatch.setattr(expaction, "UNIFORMIZATION_BUDGET", 0.0)
    expaction.expm_action(lo, d, up, np.ones(3) / 3, [1.0])
    assert seen


def test_unknown_method():
    lo, d, up = random_generator(3, 3)
    with pytest.raises(ValueError):
        expaction.expm_action(lo, d, up, np.ones(3) / 3, [1.0], method="taylor")
