import json
import math

import numpy as np
import pytest

import bozd


def test_families_and_transforms():
    g = bozd.gaussian(1.0, 1.0)
    assert g(0.0) == pytest.approx(1.0)
    xs = np.linspace(-1.0, 1.0, 5)
    np.testing.assert_allclose(g(xs), np.exp(-xs**2))
    assert g.fourier(0.0).real == pytest.approx(math.sqrt(math.pi))
    assert g.growth == bozd.GrowthClass.Bounded
    assert bozd.spike_train(1.0, 8.0, 1.0, 2).growth == bozd.GrowthClass.Linear
    assert bozd.zero()(3.0) == 0.0


def test_formulas_agree():
    u0 = bozd.lorentzian(1.0)
    z = 2j
    op = bozd.zd_operator(u0, 0.3, z, m=1024)
    lg = bozd.zd_log_integral(u0, 0.3, z)
    assert abs(op.value - lg) <= 1e-6 * abs(lg)
    assert op.residual <= 1e-10
    pu = bozd.pi_u_explicit(u0, 0.0, z, m=1024)
    assert abs(pu.value - bozd.cauchy_extension(u0, z)) < 1e-5


def test_errors_map_to_python_exceptions():
    g = bozd.gaussian(1.0, 1.0)
    with pytest.raises(ValueError):
        bozd.zd_operator(g, 0.1, -1j)
    with pytest.raises(ValueError):
        bozd.zd_log_integral(g, 0.0, 1j)
    with pytest.raises(RuntimeError):
        bozd.branch_roots(bozd.spike_train(), 0.5, 0.0)
    assert issubclass(bozd.RegimeRefusal, RuntimeError)
    assert issubclass(bozd.NumericalFailure, ArithmeticError)


def test_branch_and_critical_set():
    g = bozd.gaussian(1.0, 1.0)
    assert bozd.first_critical_time(g) == pytest.approx(0.582910995, rel=1e-9)
    k = bozd.critical_values(g, 2.0)
    assert len(k.values) == 2
    assert len(bozd.branch_roots(g, 2.0, 3.0)) == 3
    value, err, warning = bozd.zd_real_line(g, 2.0, 0.5)
    assert abs(value - bozd.branch_zd(g, 2.0, 0.5)) <= 1e-3


def test_solver_conserves_l2():
    x, u, info = bozd.solve(bozd.gaussian(1.0, 1.0), 0.5, 0.2, L=20.0, n_modes=512, dt=1e-3)
    assert x.shape == u.shape == (512,)
    assert info["relative_drift"] < 1e-8
    assert info["steps"] == 500


def test_identity_submodule():
    fs = bozd.identity.standard_functions()
    assert [f.name for f in fs][:1] == ["gauss"]
    r = bozd.identity.lemma17_check(fs[0], 1)
    assert r.status == "pass"
    t = bozd.identity.toeplitz_moment_check(fs[0], 2)
    assert t.rel_err <= 1e-7


def test_run_config(tmp_path):
    cfg = {
        "command": "zd-compare",
        "initial_data": {"family": "zero"},
        "t": [1.0],
        "x_points": [0.0, 1.0],
    }
    code, msg, files = bozd.run_config(json.dumps(cfg), "", str(tmp_path))
    assert code == 0, msg
    assert any(f.endswith(".csv") for f in files)
    code, msg, files = bozd.run_config(json.dumps({"command": "pi-u"}))
    assert code == 2
    assert files == []
