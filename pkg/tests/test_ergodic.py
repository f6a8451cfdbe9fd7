import numpy as np
import pytest

from perronhjb.controls import ControlSignal
from perronhjb.ergodic import (attractiveness_probe, build_ergodic_set, connect, outward_normals,
                               polyline_intersections, stability_check)
from perronhjb.errors import ValidationError
from perronhjb.perron import spectrum
from perronhjb.simplex import chart, field_b, integrate, uniform_simplex


@pytest.fixture(scope="module")
def zset(params):
    return build_ergodic_set(params, delta=0.05)


def test_endpoints_converge(zset):
    assert max(zset.endpoint_errors().values()) <= 1e-6


def test_curves_lie_on_opposite_sides_of_eigenvector_curve(params, zset):
    s_lo, s_hi = zset.phi_signs(params)
    assert s_lo.size == 1 and s_hi.size == 1 and s_lo[0] == -s_hi[0]


def test_contains_eigenvectors_between_bounds(params, zset):
    inside = [spectrum(params, a).e1 for a in np.linspace(1.2, 5.8, 9)]
    assert np.all(zset.contains(np.array(inside)))
    assert not zset.contains([0.0, 0.0, 1 / 3])[0]


def test_offsets_are_nested(params, zset):
    e = spectrum(params, 3.35).e1
    for z in (zset.z_minus, zset, zset.z_plus2):
        assert z.contains(e)[0]
    assert abs(zset.z_minus.signed_area()) < abs(zset.signed_area()) < abs(zset.z_plus2.signed_area())


def test_zero_delta_offsets_are_the_set(params):
    z = build_ergodic_set(params, delta=0.0)
    assert z.z_minus is z and z.z_plus2 is z


def test_bad_delta(params):
    with pytest.raises(ValidationError):
        build_ergodic_set(params, delta=0.6)


def test_stability(params, zset):
    rep = stability_check(params, zset, n_samples=500)
    assert rep.ok and rep.n_checked >= 500
    assert rep.tangential < 1e-12
    assert stability_check(params, zset.z_plus2).ok


def test_outward_normals_point_away(params, zset):
    # stepping along the normal leaves the region, stepping against it stays
    for pts, ctrl in ((zset.gamma_lo, zset.lo), (zset.gamma_hi, zset.hi)):
        # away from the cusps at the two equilibria, where the region is thin
        far = np.minimum(np.linalg.norm(pts - zset.e_lo, axis=1),
                         np.linalg.norm(pts - zset.e_hi, axis=1)) > 0.05
        z = pts[far][::20]
        assert len(z) >= 10
        n = outward_normals(params, zset, z, ctrl)
        assert not np.any(zset.contains(z + 2e-3 * n))
        assert np.all(zset.contains(z - 2e-3 * n))


def test_trajectories_stay_inside(params, zset):
    # random bang controls from the eigenvector at alpha*: never leave Z
    rng = np.random.default_rng(3)
    y = spectrum(params, 3.35).e1
    vals = rng.choice([params.a, params.A], 30)
    ctrl = ControlSignal.sampled(np.arange(30) * 0.3, vals)
    run = integrate(params, y, ctrl, 9.0, dt=1e-3, record_every=20)
    assert np.all(zset.z_plus2.contains(run.points))


def test_polyline_intersections_simple():
    P = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
    Q = np.array([[0.0, 0.5], [2.0, 0.5]])
    i, u, j, v = polyline_intersections(P, Q)
    assert i.tolist() == [0, 1]
    assert np.allclose(P[i] + u[:, None] * (P[i + 1] - P[i]), [[0.5, 0.5], [1.5, 0.5]])


def test_connect_random_pairs(params, zset):
    rng = np.random.default_rng(7)
    region = zset.z_minus
    pts = uniform_simplex(params, rng, 4000)
    pts = pts[region.contains(pts)][:40]
    assert len(pts) == 40
    for z, zt in zip(pts[:20], pts[20:]):
        res = connect(params, z, zt, region=region)
        assert res.landing_error <= 1e-4
        assert res.first != res.second and res.T > 0


def test_connect_same_point(params, zset):
    z = spectrum(params, 3.0).e1
    res = connect(params, z, z, region=zset.z_minus)
    assert res.T == 0.0 and res.landing_error == 0.0


def test_connect_rejects_outside(params, zset):
    with pytest.raises(ValidationError):
        connect(params, [1.0, 0.0, 0.0], spectrum(params, 3.0).e1, region=zset.z_minus)


def test_probe_reproducible_and_enters(params):
    r1 = attractiveness_probe(params, delta=0.1, n_trials=8, seed=11)
    r2 = attractiveness_probe(params, delta=0.1, n_trials=8, seed=11)
    assert r1.ok
    assert np.array_equal(r1.entry_times, r2.entry_times)


def test_probe_inside_start_enters_at_zero(params):
    e = spectrum(params, 3.35).e1
    rep = attractiveness_probe(params, delta=0.1, n_trials=3, starts=e[None, :], T_max=5.0)
    assert np.all(rep.entry_times == 0.0) and rep.ok


def test_field_b_inward_on_faces_chart(params):
    # chart sanity: the faces y1 = 0 and y2 = 0 are not crossed
    y = np.array([[0.0, 0.2, (1 - 0.4) / 3], [0.3, 0.0, 0.7 / 3]])
    for a in (params.a, params.A):
        c = chart(field_b(params, y, np.full(2, a)))
        assert c[0, 0] >= 0 and c[1, 1] >= 0
