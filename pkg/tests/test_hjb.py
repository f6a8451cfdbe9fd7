import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from perronhjb.errors import CFLError, ValidationError
from perronhjb.hjb import (GridField, Scheme, SimplexGrid, a_prime, extract_eigenvector, hamiltonian,
                           optimality_identity, optimal_trajectory, polyline_distance,
                           run_discounted, run_time_dependent, step_time_dependent,
                           verify_particular_solution)
from perronhjb.perron import lambda_P, optimize_perron, spectrum
from perronhjb.simplex import field_b, reward, uniform_simplex
from perronhjb.spectral import build_running_example, table1


@pytest.fixture(scope="module")
def grid(params):
    return SimplexGrid(params, 2e-2)


@pytest.fixture(scope="module")
def scheme(grid):
    return Scheme.build(grid)


@pytest.fixture(scope="module")
def run(params):
    return run_time_dependent(params, dy=1e-2, dt=1e-3, T=10.0)


# ---- grid


def test_grid_shape(params):
    g = SimplexGrid(params, 1e-2)
    # i + 2 j <= 100
    assert g.size == sum(51 - (i + 1) // 2 for i in range(101))
    assert np.all(g.i + 2 * g.j <= 100)
    assert np.allclose(g.points @ params.m, 1.0)
    assert np.all(g.points >= 0)


def test_grid_interior_has_four_neighbors(grid):
    nb = grid.axis_neighbors()
    inner = grid.interior()
    assert inner.sum() > 0
    for v in nb.values():
        assert np.all(v[inner] >= 0)
    # nodes on y1 = 0 miss the backward y1 neighbor
    assert np.all(nb[(-1, 0)][grid.i == 0] == -1)


def test_grid_rejects_bad_spacing(params):
    with pytest.raises(ValidationError):
        SimplexGrid(params, 0.0)


def test_gradient_of_linear_field(grid):
    u = 2.0 * grid.chart[:, 0] - 3.0 * grid.chart[:, 1]
    dm, dp = GridField(grid, u).gradient()
    for D in (dm, dp):
        ok = ~np.isnan(D[:, 0])
        assert np.allclose(D[ok, 0], 2.0)
        ok = ~np.isnan(D[:, 1])
        assert np.allclose(D[ok, 1], -3.0)


def test_field_csv(grid, tmp_path):
    f = GridField(grid, np.zeros(grid.size))
    f.to_csv(tmp_path / "u.csv")
    lines = open(tmp_path / "u.csv").read().splitlines()
    assert lines[0] == "i,j,y1,y2,y3,u" and len(lines) == grid.size + 1


def test_field_rejects_nan(grid):
    with pytest.raises(ValidationError):
        GridField(grid, np.full(grid.size, np.nan))


# ---- Hamiltonian


def test_hamiltonian_zero_gradient(params, rng):
    y = uniform_simplex(params, rng, 10)
    val, arg = hamiltonian(params, y, np.zeros((10, 2)))
    assert np.allclose(val, reward(params, y)) and np.all(arg == params.A)


@pytest.mark.parametrize("beta", [1.0, 3.35, 6.0])
def test_hamiltonian_at_eigenvector(params, beta):
    e = spectrum(params, beta).e1
    assert np.isclose(hamiltonian(params, e, [0.0, 0.0])[0], lambda_P(params, beta), atol=1e-12)
    # value with a gradient: (A - beta)<Fe, p>_+ + (beta - a)<Fe, p>_- ... in affine form
    p = np.array([0.3, -0.7])
    fe = (params.F @ e)[:2] @ p
    ref = lambda_P(params, beta) + (params.A - beta) * max(fe, 0) + (params.a - beta) * min(fe, 0)
    assert np.isclose(hamiltonian(params, e, p)[0], ref, atol=1e-12)


def test_hamiltonian_is_max_over_controls(params, rng):
    y = uniform_simplex(params, rng, 30)
    p = rng.normal(size=(30, 2))
    val, _ = hamiltonian(params, y, p)
    grid_alpha = np.linspace(params.a, params.A, 51)
    brute = np.max([np.sum(field_b(params, y, np.full(30, al))[:, :2] * p, axis=1)
                    for al in grid_alpha], axis=0) + reward(params, y)
    assert np.allclose(val, brute, atol=1e-12)


def test_hamiltonian_not_coercive(params):
    # at e_beta the value stays lambda_P(beta) along p orthogonal to (F e_beta) in the chart
    y = spectrum(params, 3.0).e1
    f = (params.F @ y)[:2]
    d = np.array([-f[1], f[0]]) / np.linalg.norm(f)
    vals = [hamiltonian(params, y, t * d)[0] for t in (1.0, 10.0, 100.0)]
    assert np.allclose(vals, lambda_P(params, 3.0), atol=1e-10)
    # below a, the direction -F e_beta makes it decrease without bound
    y = spectrum(params, 0.5).e1
    d = -(params.F @ y)[:2]
    d /= np.linalg.norm(d)
    vals = [hamiltonian(params, y, t * d)[0] for t in (1.0, 10.0, 100.0)]
    assert vals[0] > vals[1] > vals[2]


# ---- scheme


def test_operators_are_monotone(scheme):
    for D in (scheme.D_a, scheme.D_A):
        off = D - np.diag(D.diagonal())
        assert off.min() >= 0
        assert np.allclose(np.asarray(D.sum(axis=1)).ravel(), 0.0, atol=1e-10)


def test_upwind_targets_are_lattice_neighbors(params, grid, scheme):
    # every stencil entry is a masked node one lattice direction away, also on the slanted edge
    dirs = {tuple(d) for d in grid.dirs}
    edge = grid.i * params.m[0] + grid.j * params.m[1] == int(round(1 / grid.dy))
    assert edge.sum() > 0
    for D in (scheme.D_a, scheme.D_A):
        coo = D.tocoo()
        off = coo.row != coo.col
        r, c = coo.row[off], coo.col[off]
        steps = {(int(di), int(dj)) for di, dj in zip(grid.i[c] - grid.i[r], grid.j[c] - grid.j[r])}
        assert steps <= dirs
        assert np.all(np.bincount(r, minlength=grid.size)[edge] >= 1)


def test_scheme_consistent_on_linear_field(params, grid, scheme):
    # differences of a linear function are exact: D u = <b, grad u>
    g = np.array([1.5, -0.5])
    u = grid.chart @ g
    for al, D in ((params.a, scheme.D_a), (params.A, scheme.D_A)):
        b = field_b(params, grid.points, np.full(grid.size, al))[:, :2]
        assert np.allclose(D @ u, b @ g, atol=1e-10)


def test_step_from_constant(params, grid, scheme):
    dt = 0.5 * scheme.max_step()
    u = step_time_dependent(scheme, np.full(grid.size, 2.0), dt)
    assert np.allclose(u, 2.0 + dt * reward(params, grid.points))
    u1 = step_time_dependent(scheme, np.zeros(grid.size), dt)
    assert np.allclose(u1, dt * reward(params, grid.points))


def test_cfl_violation_raises(scheme, grid):
    with pytest.raises(CFLError):
        step_time_dependent(scheme, np.zeros(grid.size), 2 * scheme.max_step())


def test_cfl_certificate(run):
    assert run.cfl <= 0.5 + 1e-12
    assert run.diagnostics["monotone_rate"] <= 1.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 1.0))
def test_monotonicity_perturbation(seed, frac):
    p = table1()
    g = SimplexGrid(p, 5e-2)
    sch = Scheme.build(g)
    rng = np.random.default_rng(seed)
    u = rng.normal(size=g.size)
    dt = frac * sch.max_step()
    base = step_time_dependent(sch, u, dt)
    k = rng.integers(g.size)
    v = u.copy()
    v[k] += rng.uniform(1e-3, 1.0)
    assert np.all(step_time_dependent(sch, v, dt) - base >= -1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.floats(-5.0, 5.0))
def test_constant_shift_commutes(seed, c):
    p = table1()
    g = SimplexGrid(p, 5e-2)
    sch = Scheme.build(g)
    u = np.random.default_rng(seed).normal(size=g.size)
    dt = 0.5 * sch.max_step()
    assert np.allclose(step_time_dependent(sch, u + c, dt), step_time_dependent(sch, u, dt) + c,
                       atol=1e-12)


def test_runs_from_shifted_data_stay_apart(params):
    g = SimplexGrid(params, 5e-2)
    r0 = run_time_dependent(params, dt=1e-2, T=2.0, grid=g)
    r1 = run_time_dependent(params, dt=1e-2, T=2.0, grid=g, u0=np.full(g.size, 0.75))
    assert np.allclose(r1.field.values - r0.field.values, 0.75, atol=1e-12)


def test_fixed_substeps_violating_cfl(params):
    with pytest.raises(CFLError):
        run_time_dependent(params, dy=5e-2, dt=1e-2, T=1.0, substeps=1)


# ---- time-dependent run


def test_lambda_hj(run):
    assert abs(run.lambda_ratio - 0.7273) <= 5e-2
    assert abs(run.lambda_slope - 0.7273) <= 5e-2
    assert abs(run.lambda_ratio - run.lambda_slope) <= 2e-2


def test_lambda_lower_bound(run, params):
    lam = optimize_perron(params).lambda_star
    assert run.lambda_slope >= lam - 1e-3


def test_probe_collapse(run):
    assert run.collapse() <= 5e-2
    assert run.probe_values.shape == (10001, 5)


def test_refinement_reduces_error(params):
    lam = optimize_perron(params).lambda_star
    coarse = run_time_dependent(params, dy=2e-2)
    fine = run_time_dependent(params, dy=1e-2)
    assert abs(fine.lambda_slope - lam) < abs(coarse.lambda_slope - lam)
    assert abs(fine.lambda_ratio - lam) < abs(coarse.lambda_ratio - lam)


def test_eigenvector_and_separation(run, params):
    ev = extract_eigenvector(run)
    assert ev.field.values[run.probes[0]] == 0.0
    assert ev.stationarity <= 2e-2
    e = spectrum(params, optimize_perron(params).alpha_star).e1
    assert polyline_distance(ev.longest_separation(), e[:2]) <= 2 * run.dy


def test_optimal_trajectory(run, params):
    ev = extract_eigenvector(run)
    opt = optimize_perron(params)
    traj = optimal_trajectory(params, ev, [0.0, 0.5, 0.0], T=10.0, dt=1e-3)
    rec = traj.record
    assert np.linalg.norm(rec.end - spectrum(params, opt.alpha_star).e1) <= 5 * run.dy
    assert abs(traj.tail_control() - 3.35) <= 0.2
    assert abs(rec.average_reward(params)[-1] - opt.lambda_star) <= 2e-2
    # bang-bang: only the two extreme values
    assert set(np.unique(rec.alphas)) == {params.a, params.A}


# ---- discounted


@pytest.fixture(scope="module")
def discounted(params):
    return [run_discounted(params, e, dy=1e-2) for e in (0.1, 0.05, 0.01)]


def test_discounted_bound(params, discounted):
    g = discounted[0].grid
    Lmax = np.max(np.abs(reward(params, g.points)))
    for d in discounted:
        assert np.max(np.abs(d.eps * d.field.values)) <= Lmax
        assert d.diagnostics["residual"] <= 1e-9 * max(1.0, np.abs(d.field.values).max())


def test_discounted_spread_shrinks(discounted):
    spreads = [d.diagnostics["spread"] for d in discounted]
    assert spreads[0] > spreads[1] > spreads[2]


def test_discounted_matches_time_dependent(params, discounted, run):
    lam = optimize_perron(params).lambda_star
    m = discounted[-1].diagnostics["mean"]
    assert abs(m - lam) <= 5e-2
    assert abs(m - run.lambda_ratio) <= 2e-2


def test_discounted_rejects_bad_eps(params):
    with pytest.raises(ValidationError):
        run_discounted(params, 0.0)


# ---- particular solution


def test_particular_solution_monotone():
    p = build_running_example(0.5, 0.5, 1.0, 2.0, a=1.0, A=6.0)
    rep = verify_particular_solution(p)
    assert rep.case == "monotone" and rep.passed, rep.summary()


def test_particular_solution_subdomain():
    p = build_running_example(0.5, 5.0, 1.0, 2.0, a=0.5, A=2.0)
    rep = verify_particular_solution(p)
    assert rep.case == "subdomain" and rep.passed, rep.summary()
    Ap = rep.a_prime
    assert Ap > optimize_perron(p).alpha_star
    assert np.isclose(lambda_P(p, Ap), lambda_P(p, 2.0), atol=1e-10)
    assert 0 < rep.in_domain.sum() < rep.in_domain.size


def test_particular_solution_precondition(params):
    with pytest.raises(ValidationError):
        verify_particular_solution(params)
    p = build_running_example(0.5, 5.0, 1.0, 2.0, a=0.5, A=2.0)
    with pytest.raises(ValidationError):
        verify_particular_solution(p, subdomain_ok=False)


def test_a_prime_absent_for_monotone_family():
    assert a_prime(build_running_example(0.5, 0.5, 1.0, 2.0)) is None


def test_optimality_identity(rng):
    p = build_running_example(0.5, 0.5, 1.0, 2.0, a=1.0, A=6.0)
    phi = spectrum(p, p.A).left[0]
    for y in uniform_simplex(p, rng, 20):
        if (p.F @ y) @ phi >= 0:
            best, lam = optimality_identity(p, y)
            assert np.isclose(best, lam, atol=1e-12)
