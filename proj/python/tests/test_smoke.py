import json
import math
from pathlib import Path

import numpy as np
import pytest

import hkflow

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def dirac_pair(d, a, b):
    dom = hkflow.interval(0.0, d, 2)
    w = dom.weights
    return hkflow.Measure(dom, np.array([a / w[0], 0.0])), hkflow.Measure(dom, np.array([0.0, b / w[1]]))


def test_two_dirac_closed_form():
    for d in (0.3, 1.2, 2.0):
        mu, nu = dirac_pair(d, 1.5, 0.5)
        expected = 2.0 - 2.0 * math.sqrt(0.75) * math.cos(min(d, math.pi / 2))
        assert hkflow.hk_distance_squared(mu, nu)["value"] == pytest.approx(expected, abs=1e-9)
        assert hkflow.hk_two_dirac(1.5, 0.5, d) == pytest.approx(expected)


def test_shk_of_normalized_measures():
    dom = hkflow.interval(0.0, 1.0, 8)
    mu = hkflow.Measure(dom, np.linspace(0.5, 1.5, 8)).normalized()
    nu = hkflow.Measure(dom, np.linspace(1.5, 0.5, 8)).normalized()
    hk = math.sqrt(hkflow.hk_distance_squared(mu, nu)["value"])
    assert hkflow.shk_distance(mu, nu) == pytest.approx(2 * math.asin(hk / 2))
    with pytest.raises(ValueError):
        hkflow.shk_distance(mu, nu.scaled(2.0))


def test_uniform_mm_matches_scalar_recursion():
    dom = hkflow.interval(0.0, 1.0, 16)
    e = hkflow.Entropy.power_mass(1.0, 2.0, 0.0)
    traj = hkflow.run_mm("HK", hkflow.Measure(dom, np.ones(16)), e, 0.1, 4)
    scalar = hkflow.scalar_mm(1.0, 0.1, e, 4)
    for rho, c in zip(traj.densities, scalar):
        assert np.allclose(rho, c, rtol=1e-8)
    assert all(np.diff(traj.energies) <= 1e-12)


def test_pde_conserves_mass_without_reaction():
    dom = hkflow.interval(0.0, 1.0, 32)
    rho0 = hkflow.Measure(dom, 0.5 + 0.3 * np.cos(np.pi * dom.coords[:, 0]))
    rho = hkflow.solve_pde("HK", rho0, hkflow.Entropy.power_mass(1.0, 2.0, -1.0), 0.05, 1.0, 0.0)
    assert float(np.dot(rho, dom.weights)) == pytest.approx(rho0.mass, abs=1e-10)


def test_transfer_estimates():
    holds, min_q, _, _ = hkflow.check_transfer_estimates(0.75, 60)
    assert holds and min_q >= -1e-9
    holds, _, _, delta = hkflow.check_transfer_estimates(0.4, 200)
    assert not holds and delta > 3.0


def test_experiment_driver(tmp_path):
    code, files, failures = hkflow.run_experiment("distance", str(CONFIGS / "two_dirac.json"), str(tmp_path / "d"))
    assert code == 0 and "distance.json" in files and not failures
    out = json.loads((tmp_path / "d" / "distance.json").read_text())
    assert out["distance_squared"] == pytest.approx(3.0 - 2.0 * math.sqrt(2.0) * math.cos(0.5))
    code, _, _ = hkflow.run_experiment("mm-run", str(CONFIGS / "empty.json"), str(tmp_path / "e"))
    assert code == 2
