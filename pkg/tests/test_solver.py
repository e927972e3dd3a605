"""Finite-volume solver unit tests."""
import numpy as np
import pytest

from hkslab.core import PhysParams, SimState, make_grid
from hkslab.scenarios import ScenarioConfig, build_data
from hkslab.solver import (SolverConfig, cfl_dt, flux, max_char_speed,
                           numerical_flux_hll, numerical_flux_rusanov,
                           observed_max_speed, run, step)


def _bump_state(n=256, c_bar=2.0):
    return build_data(ScenarioConfig(scenario="remark11", c_bar=c_bar,
                                     grid=make_grid(1, n, 16.0)))


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(cfl=0.0)
    with pytest.raises(ValueError):
        SolverConfig(scheme="roe")
    with pytest.raises(ValueError):
        SolverConfig(reconstruction="weno")
    with pytest.raises(ValueError):
        SolverConfig(gradient_abort_factor=1.0)


def test_flux_and_speed():
    rho = np.array([1.0, 4.0])
    q = np.array([0.0, -1.0])
    f_rho, f_q = flux(rho, q)
    assert np.allclose(f_rho, [0.0, -4.0])
    assert np.allclose(f_q, rho)
    # (|q| + sqrt(q^2 + 4 rho)) / 2
    assert np.allclose(max_char_speed(rho, q),
                       [(0 + 2.0) / 2, (1 + np.sqrt(17.0)) / 2])


def test_numerical_fluxes_consistent():
    """Both fluxes reduce to the physical flux for equal left/right states."""
    rho = np.array([1.3])
    q = np.array([-0.4])
    exact = flux(rho, q)
    for num_flux in (numerical_flux_rusanov, numerical_flux_hll):
        got = num_flux(rho, q, rho, q)
        assert np.allclose(got[0], exact[0])
        assert np.allclose(got[1], exact[1])


def test_cfl_dt_bound():
    state = _bump_state()
    config = SolverConfig(cfl=0.45)
    dt = cfl_dt(state, PhysParams(), config)
    assert 0 < dt <= 0.45 * state.grid.h / observed_max_speed(state)


def test_constant_state_is_exact():
    g = make_grid(1, 64, 8.0)
    state = SimState(g, np.ones(64), np.zeros((1, 64)), np.zeros(64))
    result = run(state, PhysParams(), SolverConfig(), t_end=0.5)
    assert result.verdict == "completed"
    assert np.max(np.abs(result.final_state.rho - 1.0)) < 1e-14
    assert np.max(np.abs(result.final_state.q)) < 1e-14
    # log c drops linearly at rate rho = 1
    assert np.max(np.abs(result.final_state.log_c + 0.5)) < 1e-12


def test_mass_is_conserved():
    state = _bump_state(n=256)
    result = run(state, PhysParams(), SolverConfig(record_every=10),
                 t_end=0.2)
    vol = state.grid.cell_volume
    m0 = np.sum(state.rho) * vol
    m1 = np.sum(result.final_state.rho) * vol
    assert abs(m1 - m0) / m0 < 1e-13


def test_gradient_abort_fires_on_steepening():
    state = _bump_state(n=1024)
    config = SolverConfig(gradient_abort_factor=4.0, reconstruction="minmod")
    result = run(state, PhysParams(), config, t_end=4.0)
    assert result.verdict == "gradient_abort"
    assert 0.0 < result.t_abort < 4.0


def test_schemes_agree_on_smooth_flow():
    state = _bump_state(n=256)
    outs = {}
    for scheme in ("rusanov", "hll"):
        result = run(state.copy(), PhysParams(),
                     SolverConfig(scheme=scheme, record_every=10), t_end=0.1)
        outs[scheme] = result.final_state.rho
    assert np.max(np.abs(outs["rusanov"] - outs["hll"])) < 5e-2


def test_step_returns_record():
    state = _bump_state(n=128)
    new_state, rec = step(state, PhysParams(), SolverConfig())
    assert new_state.t_scaled == pytest.approx(rec.t_scaled)
    assert rec.dt > 0 and rec.norms.finite


def test_record_and_snapshot_cadence():
    state = _bump_state(n=128)
    config = SolverConfig(record_every=5, snapshot_every=3, max_steps=12)
    result = run(state, PhysParams(), config, t_end=100.0)
    assert result.verdict == "step_limit"
    # initial + floor(12/5) + appended final
    assert len(result.records) == 1 + 2 + 1
    # initial + steps 3,6,9,12 (the final step falls on the cadence)
    assert len(result.snapshots) == 1 + 4
    times = [s.t_scaled for s in result.snapshots]
    assert times == sorted(times)


def test_snapshots_disabled():
    state = _bump_state(n=128)
    result = run(state, PhysParams(), SolverConfig(snapshot_every=0,
                                                   max_steps=5), t_end=100.0)
    assert result.snapshots == []
