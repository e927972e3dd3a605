"""Shared fixtures: the expensive reference runs are session-scoped so the
acceptance tests and the module tests can reuse them."""
import numpy as np
import pytest

from hkslab.core import make_grid
from hkslab.scenarios import ScenarioConfig, run_scenario
from hkslab.solver import SolverConfig


def canonical_solver(**overrides):
    """Solver settings shared by the reference experiments."""
    base = dict(gradient_abort_factor=4.0, reconstruction="minmod",
                max_steps=100000)
    base.update(overrides)
    return SolverConfig(**base)


@pytest.fixture(scope="session")
def canonical_abort_run():
    """Bump-data blow-up run on the finest 1D grid; aborts at t ~ 0.358."""
    config = ScenarioConfig(
        scenario="remark11",
        grid=make_grid(1, 2048, 16.0),
        t_end=6.4,
        solver=canonical_solver())
    return run_scenario(config)


@pytest.fixture(scope="session")
def riccati_sweep():
    """Long no-abort bump runs at three resolutions, with traced invariants."""
    reports = {}
    for n in (512, 1024, 2048):
        config = ScenarioConfig(
            scenario="remark11",
            grid=make_grid(1, n, 16.0),
            t_end=6.4,
            solver=canonical_solver(gradient_abort_factor=1e5, record_every=20))
        reports[n] = run_scenario(config)
    return reports


@pytest.fixture(scope="session")
def propagation_pairs():
    """Bump-vs-constant run pairs at three resolutions for the cone check."""
    pairs = {}
    for n in (512, 1024, 2048):
        solver = canonical_solver(gradient_abort_factor=1e6, record_every=10)
        grid = make_grid(1, n, 16.0)
        bump = run_scenario(ScenarioConfig(scenario="remark11", grid=grid,
                                           t_end=0.25, solver=solver))
        const = run_scenario(ScenarioConfig(scenario="constant", grid=grid,
                                            t_end=0.25, solver=solver))
        pairs[n] = (bump.extras["result"], const.extras["result"])
    return pairs


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def covered_points(rng, count, z2_lim=1.5, margin=0.3, spread=3.0):
    """Random phase points strictly above the separatrix rho = (3/4) q^2."""
    z2 = rng.uniform(-z2_lim, z2_lim, size=count)
    z1 = 0.75 * z2 * z2 + rng.uniform(margin, margin + spread, size=count)
    return z1, z2
