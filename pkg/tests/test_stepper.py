"""Time integrator against a dense reference and its structural invariants."""

import numpy as np
import pytest

from eulerflow import assembly, physics, problems
from eulerflow.assembly import assemble
from eulerflow.mesh import rectangle_mesh
from eulerflow.physics import AdmissibilityError
from eulerflow.stepper import Solver, compute_tau

import oracles


def random_field(rng, n, dim=2):
    U = np.zeros((n, dim + 2))
    U[:, 0] = 1.0 + 0.5 * rng.random(n)
    U[:, 1:-1] = rng.normal(0.0, 0.3, (n, dim)) * U[:, 0:1]
    p = 0.5 + rng.random(n)
    U[:, -1] = p / 0.4 + 0.5 * (U[:, 1:-1] ** 2).sum(axis=1) / U[:, 0]
    return U


@pytest.fixture(scope="module")
def small_periodic():
    m = rectangle_mesh(4, 4, periodic=(True, True))
    mat = assemble(m)
    rng = np.random.default_rng(7)
    return mat, random_field(rng, mat.n)


@pytest.mark.parametrize("passes", [0, 1, 2, 3])
def test_matches_dense_reference(small_periodic, passes):
    mat, U = small_periodic
    tau_ref, U_ref, alpha_ref = oracles.dense_euler_step(U, mat, passes=passes)
    s = Solver(mat, limiter_passes=passes)
    s.set_state(U)
    tau = s.euler_step()
    assert tau == tau_ref
    assert np.allclose(s.get_state(), U_ref, rtol=1e-13, atol=1e-13)


def test_tau_equals_compute_tau_on_assembled_viscosity(small_periodic):
    mat, U = small_periodic
    s = Solver(mat, c_cfl=0.5)
    s.set_state(U)
    tau = s.euler_step()
    rk = s.ranks[0]
    n_lo = rk.numbering.n_lo
    d_diag = rk.d[np.arange(n_lo), rk.diag_slot[:n_lo]]
    assert tau == compute_tau(d_diag, rk.m_i[:n_lo], 0.5)


def test_compute_tau_raises_on_constant_field():
    with pytest.raises(ValueError):
        compute_tau(np.zeros(5), np.ones(5), 0.9)


def test_constant_state_is_exactly_preserved(small_periodic):
    mat, _ = small_periodic
    U = np.tile([1.4, 4.2, 0.0, 8.8], (mat.n, 1))
    s = Solver(mat)
    s.set_state(U)
    tau = s.euler_step()
    assert np.isfinite(tau) and tau > 0.0
    assert np.array_equal(s.get_state(), U)


def test_conservation_short_run(small_periodic):
    mat, U = small_periodic
    s = Solver(mat)
    s.set_state(U)
    before = (mat.m_lumped[:, None] * U).sum(axis=0)
    for _ in range(5):
        s.ssp_rk3_step()
    after = (mat.m_lumped[:, None] * s.get_state()).sum(axis=0)
    assert np.abs(after - before).max() < 1e-12 * np.abs(before).max()


def test_state_roundtrip(small_periodic):
    mat, U = small_periodic
    s = Solver(mat, ranks=3)
    s.set_state(U)
    assert np.array_equal(s.get_state(), U)


def test_rejects_inadmissible_initial_state(small_periodic):
    mat, U = small_periodic
    bad = U.copy()
    bad[3, 0] = -1.0
    s = Solver(mat)
    with pytest.raises(AdmissibilityError):
        s.set_state(bad)


def test_invalid_parameters(small_periodic):
    mat, _ = small_periodic
    with pytest.raises(ValueError):
        Solver(mat, c_cfl=0.0)
    with pytest.raises(ValueError):
        Solver(mat, c_cfl=1.5)
    with pytest.raises(ValueError):
        Solver(mat, limiter_passes=-1)


def test_rank_worker_determinism_quick(small_periodic):
    mat, U = small_periodic
    def run(**kw):
        s = Solver(mat, **kw)
        s.set_state(U)
        s.ssp_rk3_step()
        return s.get_state()
    ref = run()
    assert np.array_equal(ref, run(ranks=3))
    assert np.array_equal(ref, run(workers=2, chunk_size=3))
    assert np.array_equal(ref, run(ranks=2, workers=2, overlap=False, chunk_size=3))


def test_lane_width_does_not_change_results(small_periodic):
    mat, U = small_periodic
    outs = []
    for lanes in (1, 2, 4):
        s = Solver(mat, lanes=lanes)
        s.set_state(U)
        s.euler_step()
        outs.append(s.get_state())
    assert np.array_equal(outs[0], outs[1])
    assert np.array_equal(outs[0], outs[2])


def test_ssp_rk3_composition(small_periodic):
    mat, U = small_periodic
    s = Solver(mat)
    s.set_state(U)
    tau = s.ssp_rk3_step()
    # hand-composed stages with the shared time step
    s2 = Solver(mat)
    s2.set_state(U)
    assert s2.euler_step() == tau
    U1 = s2.get_state()
    s2.set_state(U1)
    s2.euler_step(tau)
    U2 = 0.75 * U + 0.25 * s2.get_state()
    s2.set_state(U2)
    s2.euler_step(tau)
    U3 = U / 3.0 + (2.0 / 3.0) * s2.get_state()
    assert np.allclose(s.get_state(), U3, rtol=1e-14, atol=1e-14)


def test_advance_hits_final_time(small_periodic):
    mat, U = small_periodic
    s = Solver(mat)
    s.set_state(U)
    taus = []
    s.advance(0.02, on_step=lambda k, t: taus.append(s.tau_last))
    assert abs(sum(taus) - 0.02) < 1e-13


def test_slip_wall_removes_normal_momentum():
    setup = problems.mach3_channel(2, refine=0)
    mat = assemble(setup.mesh)
    s = Solver(mat, boundary=setup.boundary)
    s.set_state(setup.U0)
    s.euler_step()
    U = s.get_state()
    bc = setup.boundary
    mom = U[bc.slip_nodes][:, 1:3]
    normal_component = (mom * bc.slip_normals).sum(axis=1)
    assert np.abs(normal_component).max() < 1e-13
    # inflow nodes hold the farfield state exactly
    assert np.array_equal(
        U[bc.inflow_nodes], np.tile(bc.farfield, (len(bc.inflow_nodes), 1))
    )


def test_alpha_zero_on_constant_state(small_periodic):
    mat, _ = small_periodic
    U = np.tile([1.0, 0.3, -0.2, 3.0], (mat.n, 1))
    s = Solver(mat)
    s.set_state(U)
    s.euler_step(tau=1e-3)
    assert np.abs(s.ranks[0].alpha).max() == 0.0


def test_timers_and_counters_advance(small_periodic):
    mat, U = small_periodic
    s = Solver(mat, ranks=2)
    s.set_state(U)
    s.ssp_rk3_step()
    assert s.n_euler_steps == 3
    assert s.comm.sync_count > 0
    assert s.comm.sync_volume > 0
    assert all(v >= 0.0 for v in s.timers.values())
    assert s.timers["step3"] > 0.0
