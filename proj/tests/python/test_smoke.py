import math

import numpy as np
import pytest

import muellertf as mt


def test_constants():
    assert mt.tf.zeta == pytest.approx((math.sqrt(73.0) - 7.0) / 2.0)
    assert mt.tf.L_sc == pytest.approx(1.0 / (15.0 * math.pi**2))


def test_unit_ball_direct_energy():
    g = mt.RadialGrid.logarithmic(1e-6, 1.0, 3000)
    f = np.full(len(g), 3.0 / (4.0 * math.pi))
    assert mt.integrate3d(g, f) == pytest.approx(1.0, abs=1e-8)
    assert mt.direct_energy(g, f) == pytest.approx(0.6, abs=1e-8)
    with pytest.raises(ValueError):
        mt.direct_energy(g, f[:-1])


def test_tf_atom():
    s = mt.solve_tf(1.0)
    assert s.mass == pytest.approx(1.0, abs=1e-6)
    assert s.rho.shape == s.r.shape == s.phi.shape
    assert np.all(s.rho >= 0.0)
    assert s.screened_charge(1e-3) == pytest.approx(1.0, abs=1e-3)


def test_exterior_tf():
    g = mt.RadialGrid.logarithmic(1e-4, 1e5, 2000)
    assert mt.solve_exterior_tf(2.0, 1.0, g).mass == pytest.approx(2.0, rel=1e-6)
    assert np.all(mt.solve_exterior_tf(-1.0, 1.0, g).rho == 0.0)


def test_mueller_hydrogen():
    o = mt.MuellerOptions()
    o.grid_n = 400
    r = mt.minimize(1.0, 1.0, o)
    assert r.converged
    assert r.breakdown.total <= -0.25
    assert all(b <= a for a, b in zip(r.energy_history, r.energy_history[1:]))
    assert r.screened_charge(r.r[-1]) == pytest.approx(0.0, abs=1e-3)


def test_sphere_average():
    assert mt.sphere_average_positive_part([0.0, 3.0, 4.0]) == pytest.approx(1.25, abs=1e-10)
    assert mt.eta_profile(0.0) == 0.0 and mt.eta_profile(1.0) == 1.0


def test_config_and_run(tmp_path):
    text = "[experiment]\ncommand = tf-solve\n\n[physics]\nZ = 1, 2\n"
    canon = mt.parse_config(text)
    assert mt.parse_config(canon) == canon
    assert len(mt.config_hash(text)) == 64
    with pytest.raises(ValueError):
        mt.parse_config("[physics]\nZ = -1\n")
    assert mt.run("", str(tmp_path / "bad")) == 2
    assert not (tmp_path / "bad").exists()
    assert mt.run(text, str(tmp_path / "run")) == 0
    assert (tmp_path / "run" / "Z_2" / "rho.csv").exists()
    assert mt.report(str(tmp_path)) == 0
    assert "## tf-solve" in (tmp_path / "summary.md").read_text()
