import numpy as np
import pytest

from openosc import gauss, grid, ladder
from openosc.params import ModelParams


def test_grid_geometry():
    g = grid.GridSpec(64, 8.0)
    assert g.h == pytest.approx(0.25)
    assert g.xd[g.diag_index] == 0.0
    assert g.x[0] == -8.0 and g.x[-1] == pytest.approx(8.0 - g.h)
    with pytest.raises(ValueError):
        grid.GridSpec(63, 8.0)
    with pytest.raises(ValueError):
        grid.GridSpec(16, 8.0)


def test_sampled_relaxed_moments(reference):
    g = grid.GridSpec(128, 8.0)
    f = grid.GridField.sample(gauss.relaxed_state(reference), g)
    assert f.boundary_clean()
    assert abs(grid.grid_expectation(f, "1") - 1) < 1e-10
    assert abs(grid.grid_expectation(f, "xx") - reference.x2()) < 1e-8
    assert abs(grid.grid_expectation(f, "pp") - reference.p2()) < 1e-2
    assert abs(grid.grid_expectation(f, "x")) < 1e-12


def test_generator_residual_is_second_order(reference):
    errs, hs = [], []
    st = gauss.relaxed_state(reference)
    for N in (32, 64, 128):
        g = grid.GridSpec(N, 8.0)
        f = grid.GridField.sample(st, g)
        errs.append(np.max(np.abs(grid.apply_generator(grid.discretize_generator(reference, g), f).values)))
        hs.append(g.h)
    assert grid.convergence_order(errs, hs) == pytest.approx(2.0, abs=0.2)


def test_trace_conserved(reference):
    g = grid.GridSpec(48, 8.0)
    f = grid.GridField.sample(ladder.w_coherent_state(0.4 + 0.1j, None, reference), g)
    res = grid.evolve(f, reference, 0.5)
    assert res.trace_drift < 1e-10
    assert res.steps > 0 and res.field.t == pytest.approx(0.5)


def test_instability_detected(reference):
    g = grid.GridSpec(48, 8.0)
    f = grid.GridField.sample(gauss.relaxed_state(reference), g)
    with pytest.raises(grid.GridInstability):
        grid.evolve(f, reference, 5.0, dt=20 * g.default_dt(reference))


def test_boundary_flag():
    p = ModelParams(1.0, 1.0, 1.0)
    g = grid.GridSpec(32, 2.0)
    f = grid.GridField.sample(gauss.relaxed_state(p), g)
    assert not f.boundary_clean()


def test_snapshot_roundtrip(tmp_path, reference):
    g = grid.GridSpec(32, 6.0, 9.0)
    f = grid.GridField.sample(gauss.relaxed_state(reference), g, t=1.5)
    path = tmp_path / "snap.bin"
    f.save(path)
    back = grid.GridField.load(path)
    assert np.array_equal(back.values, f.values)
    assert back.grid.half_d == 9.0 and back.t == 1.5


def test_fit_decay_modes():
    t = np.linspace(0, 5, 101)
    assert grid.fit_decay(t, np.exp(-0.7 * t)) == pytest.approx(-0.7, abs=1e-10)
    lam = -0.5 + 0.8660254j
    assert grid.fit_decay(t, np.exp(lam * t)) == pytest.approx(lam, abs=1e-6)
    assert grid.fit_decay(t, np.exp(lam * t).real) == pytest.approx(lam, abs=1e-6)
    assert grid.fit_decay(t, np.ones_like(t)) == 0
    with pytest.raises(ValueError):
        grid.fit_decay(t[:10], t[:10])


def test_trajectory_csv(tmp_path, reference):
    g = grid.GridSpec(32, 8.0)
    f = grid.GridField.sample(gauss.relaxed_state(reference), g)
    res = grid.evolve(f, reference, 0.2, sample_every=0.1, probes=grid.trajectory_probes())
    path = tmp_path / "traj.csv"
    grid.write_trajectory_csv(path, res)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("t [dimensionless]")
    assert len(lines) == 1 + len(res.times)
