import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from trapcheck import hamiltonian_flow as hf, sds_metric as sm, sphere
from trapcheck.errors import DomainError, InputError


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def characteristic_point(p, r, xi, rng, z=1):
    """Random point of {p = 0} over (r, ξ), or None if |η|² would be negative."""
    d = sm.delta_r(p, r)
    eta2 = r**4 / d - d * xi * xi
    if eta2 < 0:
        return None
    om = unit(rng.normal(size=p.n - 1))
    et = sphere.project_tangent(om, rng.normal(size=p.n - 1))
    return hf.PhasePoint(r, om, xi, math.sqrt(eta2) * unit(et), z)


def fd_radial_field(p, x, h=1e-6):
    """(∂p/∂ξ, -∂p/∂r) by central differences of the symbol."""
    def sym(r, xi):
        return hf.symbol_p(p, hf.PhasePoint(r, x.omega, xi, x.eta, x.z))
    return (
        (sym(x.r, x.xi + h) - sym(x.r, x.xi - h)) / (2 * h),
        -(sym(x.r + h, x.xi) - sym(x.r - h, x.xi)) / (2 * h),
    )


# ------------------------------------------------------------------ phase points

def test_phase_point_validation():
    with pytest.raises(InputError):
        hf.PhasePoint(3.0, [0, 0, 2.0], 0.0, [1.0, 0, 0])
    with pytest.raises(InputError):
        hf.PhasePoint(3.0, [0, 0, 1.0], 0.0, [0, 0, 1.0])
    with pytest.raises(InputError):
        hf.PhasePoint(3.0, [0, 0, 1.0], 0.0, [1.0, 0, 0], z=2)
    with pytest.raises(InputError):
        hf.PhasePoint(3.0, [0, 0, 1.0], math.inf, [1.0, 0, 0])
    x = hf.PhasePoint(3.0, [0, 0, 1.0], 0.0, [3.0, 4.0, 0])
    assert x.eta_norm == 5.0
    with pytest.raises(ValueError):
        x.omega[0] = 1.0


# ------------------------------------------------------------------ field

def test_hamilton_field_matches_symbol_derivatives(p4, rng):
    lo, hi = hf.exit_window(p4)
    for _ in range(20):
        r = rng.uniform(lo + 0.1, hi - 0.1)
        x = hf.PhasePoint(r, unit([0, 1.0, 1.0]), rng.normal(), [0.4, 0.0, 0.0], rng.choice([-1, 1]))
        f = hf.hamilton_field(p4, x)
        dr, dxi = fd_radial_field(p4, x)
        # FD roundoff is ~1e-10 |p| with |p| up to ~1e3 near the horizons
        assert f.dr == pytest.approx(dr, rel=1e-6, abs=1e-6)
        assert f.dxi == pytest.approx(dxi, rel=1e-6, abs=1e-6)
        np.testing.assert_array_equal(f.domega, 2 * x.eta)
        np.testing.assert_allclose(f.deta, -2 * x.eta_norm**2 * x.omega)


@pytest.mark.parametrize("n", [4, 5, 6, 7])
def test_trapped_point_is_characteristic_and_stationary(n, rng):
    p = sm.SdsParams.from_lambda(n, 1.0, 0.01)
    x = hf.trapped_point(p, unit(rng.normal(size=n - 1)), rng.normal(size=n - 1))
    assert x.r == p.r_photon and x.xi == 0.0
    assert abs(hf.symbol_p(p, x)) <= 1e-12 * x.eta_norm**2
    f = hf.hamilton_field(p, x)
    assert f.dr == 0.0 and f.dxi == 0.0


def test_trapped_point_eta_size_frozen(p4):
    x = hf.trapped_point(p4, [0, 0, 1.0], [1.0, 0, 0])
    assert x.eta_norm == pytest.approx(6.081636405595373448, rel=1e-14)


def test_trapped_point_rejects_radial_eta(p4):
    with pytest.raises(InputError):
        hf.trapped_point(p4, [0, 0, 1.0], [0, 0, 3.0])


# ------------------------------------------------------------------ linearization

def test_linearization_matches_fd_jacobian(p4, p5):
    for p in (p4, p5):
        x = hf.trapped_point(p, [0] * (p.n - 2) + [1.0], [1.0] + [0] * (p.n - 2))
        h = 1e-6
        cols = []
        for dr, dxi in ((h, 0.0), (0.0, h)):
            fp = hf.hamilton_field(p, hf.PhasePoint(x.r + dr, x.omega, x.xi + dxi, x.eta))
            fm = hf.hamilton_field(p, hf.PhasePoint(x.r - dr, x.omega, x.xi - dxi, x.eta))
            cols.append([(fp.dr - fm.dr) / (2 * h), (fp.dxi - fm.dxi) / (2 * h)])
        jac = np.array(cols).T
        lin = hf.linearization(p)
        np.testing.assert_allclose(lin.matrix, jac, rtol=1e-6, atol=1e-8)
        fd_eig = math.sqrt(jac[0, 1] * jac[1, 0])
        assert lin.positive_eigenvalue == pytest.approx(fd_eig, rel=1e-6)


def test_linearization_reference_values(p4):
    lin = hf.linearization(p4)
    # frozen from a 30-digit evaluation of the closed form
    assert lin.eigenvalue_closed_form == pytest.approx(12.163272811190746896, rel=1e-14)
    assert lin.nu_min_closed_form == pytest.approx(1.351474756798971877, rel=1e-14)
    np.testing.assert_allclose(lin.eigenvalues, [-12.163272811190746896, 12.163272811190746896], rtol=1e-12)
    assert lin.nu_min_closed_form * p4.r_photon**2 == pytest.approx(lin.eigenvalue_closed_form, rel=1e-14)


def test_linearization_schwarzschild_limit():
    # Λ → 0, n = 4: r_p = 3M and the rate is 2 r_p sqrt(3)
    p = sm.SdsParams.from_lambda(4, 1.0, 1e-14)
    assert hf.linearization(p).positive_eigenvalue == pytest.approx(6 * math.sqrt(3), rel=1e-10)


@pytest.mark.parametrize("params", [(n, m, f) for n in (4, 5, 6, 7) for m in (0.5, 2.0) for f in (0.1, 0.8)])
def test_linearization_closed_form_all_dims(params):
    n, mass, frac = params
    crit = ((n - 3) ** (n - 3) / (n - 1) ** (n - 1) / mass**2) ** (1 / (n - 3))
    p = sm.SdsParams.from_lambda(n, mass, frac * crit)
    lin = hf.linearization(p)
    assert lin.positive_eigenvalue == pytest.approx(lin.eigenvalue_closed_form, rel=1e-12)
    assert lin.eigenvalues[0] == pytest.approx(-lin.eigenvalues[1], rel=1e-12)


# ------------------------------------------------------------------ integration on Γ

@pytest.fixture(scope="module")
def gamma_orbit():
    p = sm.SdsParams.from_lambda(4, 1.0, 0.01)
    x0 = hf.trapped_point(p, [0, 0, 1.0], [1.0, 0, 0])
    return p, x0, hf.integrate(p, x0, 50.0, 1e-3)


def test_gamma_orbit_stays_on_gamma(gamma_orbit):
    p, _, traj = gamma_orbit
    assert not traj.exited
    assert len(traj) == 50001
    assert np.max(np.abs(traj.r - p.r_photon)) <= 1e-6
    assert np.max(np.abs(traj.xi)) <= 1e-6
    assert traj.p_drift <= 1e-8
    assert traj.eta_drift <= 1e-12


def test_gamma_orbit_sphere_part_is_great_circle(gamma_orbit):
    _, x0, traj = gamma_orbit
    idx = [0, 1000, 12345, 50000]
    for k in idx:
        om, et = sphere.great_circle(x0.omega, x0.eta, traj.times[k])
        np.testing.assert_allclose(traj.omega[k], om, atol=1e-7)
        np.testing.assert_allclose(traj.eta[k], et, atol=1e-6)
    assert np.max(np.abs(np.einsum("ij,ij->i", traj.omega, traj.eta))) <= 1e-12


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(4, 7), z=st.sampled_from([-1, 1]))
def test_gamma_invariance_random_directions(seed, n, z):
    rng = np.random.default_rng(seed)
    p = sm.SdsParams.from_lambda(n, 1.0, 0.01)
    x0 = hf.trapped_point(p, unit(rng.normal(size=n - 1)), rng.normal(size=n - 1), z)
    traj = hf.integrate(p, x0, 2.0, 1e-3)
    assert np.max(np.abs(traj.r - p.r_photon)) <= 1e-12
    assert traj.p_drift <= 1e-8


# ------------------------------------------------------------------ off Γ

def test_conservation_richardson_on_short_segment(p4):
    # ξ = 1e-3 over r_p: the orbit leaves only after t ≈ 0.79
    d = sm.delta_r(p4, 3.0)
    x0 = hf.PhasePoint(3.0, [0, 0, 1.0], 1e-3, [0, math.sqrt(81 / d - d * 1e-6), 0])
    drifts = [hf.integrate(p4, x0, 0.4, dt).p_drift for dt in (4e-3, 2e-3, 1e-3)]
    assert drifts[-1] <= 1e-8
    ratios = [drifts[0] / drifts[1], drifts[1] / drifts[2]]
    for q in ratios:
        assert 12.0 <= q <= 20.0  # fourth order: 2⁴ = 16


def test_integrate_sample_count_and_times(p4):
    x0 = hf.trapped_point(p4, [0, 0, 1.0], [1.0, 0, 0])
    traj = hf.integrate(p4, x0, 0.3, 0.1)
    assert len(traj) == 4
    np.testing.assert_allclose(traj.times, [0.0, 0.1, 0.2, 0.3])


def test_escaping_orbit_times_increase_and_eta_stays_on_circle(p4, rng):
    start = characteristic_point(p4, 3.0, 1e-3, rng)
    traj = hf.integrate(p4, start, 50.0, 1e-3)
    assert traj.exited
    assert np.all(np.diff(traj.times) > 0)
    assert traj.eta_drift <= 1e-8


def test_integrate_input_errors(p4):
    x0 = hf.trapped_point(p4, [0, 0, 1.0], [1.0, 0, 0])
    with pytest.raises(InputError):
        hf.integrate(p4, x0, 1.0, 0.0)
    with pytest.raises(InputError):
        hf.integrate(p4, x0, -1.0, 1e-3)
    bad = hf.PhasePoint(8.785, [0, 0, 1.0], 0.0, [1.0, 0, 0])
    with pytest.raises(DomainError):
        hf.integrate(p4, bad, 1.0, 1e-3)


@pytest.mark.parametrize("delta", [1e-3, -1e-3, 0.05, -0.05])
def test_exit_side_follows_xi_sign(p4, delta):
    d = sm.delta_r(p4, p4.r_photon)
    eta = math.sqrt(p4.r_photon**4 / d - d * delta**2)
    x0 = hf.PhasePoint(p4.r_photon, [0, 0, 1.0], delta, [eta, 0, 0])
    traj = hf.integrate(p4, x0, 50.0, 1e-3)
    assert traj.exited
    assert traj.exit_side == ("plus" if delta > 0 else "minus")
    lo, hi = hf.exit_window(p4)
    assert np.all((traj.r > lo) & (traj.r < hi))
    # monotone while the step resolves the flow; the tail next to the horizon does not
    resolved = np.abs(traj.p_values - traj.p_values[0]) <= 1e-6
    assert np.count_nonzero(resolved) >= 0.9 * len(traj)
    assert np.all(np.diff(traj.r[resolved]) * np.sign(delta) > 0)


def test_random_seeds_exit_within_200(p4):
    rng = np.random.default_rng(7)
    lo, hi = hf.exit_window(p4)
    done = 0
    while done < 8:
        r = rng.uniform(lo, hi)
        xi = rng.uniform(-1, 1) * r * r / sm.delta_r(p4, r)
        if abs(xi) < 1e-2 and abs(r - p4.r_photon) < 1e-2:
            continue
        x0 = characteristic_point(p4, r, xi, rng)
        traj = hf.integrate(p4, x0, 200.0, 1e-3)
        assert traj.exited and traj.exit_time <= 200.0
        done += 1


@pytest.mark.xfail(strict=True, reason="the flow is singular at the horizons; drift grows near exit")
def test_conservation_on_escaping_orbit(p4):
    x0 = hf.PhasePoint(
        p4.r_photon, [0, 0, 1.0], 1e-3,
        [math.sqrt(81 / sm.delta_r(p4, 3.0) - sm.delta_r(p4, 3.0) * 1e-6), 0, 0],
    )
    traj = hf.integrate(p4, x0, 50.0, 1e-3)
    assert traj.p_drift <= 1e-8


def test_escaping_orbit_conserves_until_xi_grows(p4):
    d = sm.delta_r(p4, 3.0)
    x0 = hf.PhasePoint(3.0, [0, 0, 1.0], 1e-3, [math.sqrt(81 / d - d * 1e-6), 0, 0])
    traj = hf.integrate(p4, x0, 50.0, 1e-3)
    calm = np.abs(traj.xi) <= 1.0
    assert np.max(np.abs(traj.p_values[calm] - traj.p_values[0])) <= 1e-8


# ------------------------------------------------------------------ escape function

def test_escape_scan_has_no_violations(p4):
    assert hf.escape_scan(p4) == []


def test_escape_scan_n6():
    p = sm.SdsParams.from_lambda(6, 1.0, 0.05)
    assert hf.escape_scan(p, n_r=40, n_xi=40) == []


def test_escape_derivatives_match_finite_differences(p4, rng):
    h = 1e-6
    lo, hi = hf.exit_window(p4)
    for _ in range(20):
        r = rng.uniform(lo + 0.2, hi - 0.2)
        x = characteristic_point(p4, r, rng.uniform(-0.5, 0.5) * r * r / sm.delta_r(p4, r), rng)
        f = hf.hamilton_field(p4, x)
        fval = lambda y: (y.r - p4.r_photon) ** 2
        shift = lambda s: hf.PhasePoint(x.r + s * f.dr, x.omega, x.xi + s * f.dxi, x.eta)
        hpf, hp2f = hf.escape_derivatives(p4, x)
        assert hpf == pytest.approx((fval(shift(h)) - fval(shift(-h))) / (2 * h), rel=1e-6, abs=1e-9)
        hpf_p = hf.escape_derivatives(p4, shift(h))[0]
        hpf_m = hf.escape_derivatives(p4, shift(-h))[0]
        assert hp2f == pytest.approx((hpf_p - hpf_m) / (2 * h), rel=1e-5, abs=1e-7)


def test_escape_second_derivative_positive_on_critical_lines(p4, rng):
    for r in np.linspace(2.3, 8.5, 13):
        if abs(r - 3.0) < 1e-3:
            continue
        x = characteristic_point(p4, r, 0.0, rng)
        hpf, hp2f = hf.escape_derivatives(p4, x)
        assert hpf == 0.0 and hp2f > 0
    for s in (-0.7, -0.1, 0.2, 0.9):
        x = characteristic_point(p4, 3.0, s * 9 / sm.delta_r(p4, 3.0), rng)
        hpf, hp2f = hf.escape_derivatives(p4, x)
        assert hpf == 0.0 and hp2f > 0


# ------------------------------------------------------------------ Lyapunov rates

@pytest.mark.parametrize("n", [5, 6, 7])
def test_lyapunov_rate_matches_eigenvalue(n):
    p = sm.SdsParams.from_lambda(n, 1.0, 0.3 * ((n - 3) ** (n - 3) / (n - 1) ** (n - 1)) ** (1 / (n - 3)))
    res = hf.lyapunov_normal(p, T=10.0)
    assert res.relative_error <= 1e-4
    assert abs(res.tangential_rate) <= 1e-6


def test_lyapunov_warns_on_short_horizon(p4):
    with pytest.warns(hf.AccuracyWarning):
        hf.lyapunov_normal(p4, T=0.1, dt=1e-3)


# ------------------------------------------------------------------ sphere transport

@pytest.mark.parametrize("m", [3, 4, 6])
def test_sphere_transport_matches_ode(m, rng):
    om0 = unit(rng.normal(size=m))
    eta = sphere.project_tangent(om0, rng.normal(size=m))
    v0 = sphere.project_tangent(om0, rng.normal(size=m))

    def rhs(t, v):
        om, et = sphere.great_circle(om0, eta, t)
        return -(v @ (2 * et)) * om

    t_end = 1.7
    sol = solve_ivp(rhs, (0, t_end), v0, rtol=1e-12, atol=1e-12)
    got = hf.sphere_transport(om0, eta, t_end, v0)
    np.testing.assert_allclose(got, sol.y[:, -1], atol=1e-9)
    om_t, _ = sphere.great_circle(om0, eta, t_end)
    assert abs(got @ om_t) <= 1e-12
    assert np.linalg.norm(got) == pytest.approx(np.linalg.norm(v0), rel=1e-13)


def test_sphere_transport_keeps_eta_direction_and_length(rng):
    om0 = unit(rng.normal(size=4))
    eta = sphere.project_tangent(om0, rng.normal(size=4))
    v_perp = sphere.project_tangent(om0, rng.normal(size=4))
    v_perp -= (v_perp @ eta) / (eta @ eta) * eta
    for t in np.linspace(0.0, 100.0, 41):
        _, eta_t = sphere.great_circle(om0, eta, t)
        along = hf.sphere_transport(om0, eta, t, eta)
        np.testing.assert_allclose(along, eta_t, atol=1e-10)
        across = hf.sphere_transport(om0, eta, t, v_perp)
        assert abs(across @ eta_t) <= 1e-10 * np.linalg.norm(eta)
        assert np.linalg.norm(across) == pytest.approx(np.linalg.norm(v_perp), rel=1e-12)


def test_sphere_transport_rejects_normal_vectors():
    with pytest.raises(InputError):
        hf.sphere_transport([0, 0, 1.0], [1.0, 0, 0], 1.0, [0, 0, 1.0])


def stepwise_tangential(x0, n_steps, dt):
    """Direct RK4 of the linearized sphere flow with projection after every step."""
    om, et = x0.omega.copy(), x0.eta.copy()
    m, size = om.size, x0.eta_norm
    frame = sphere.tangent_frame(om, lead=et)
    cols = [np.concatenate([frame[:, i], -(et @ frame[:, i]) * om]) for i in range(m - 1)]
    cols += [np.concatenate([np.zeros(m), size * frame[:, i]]) for i in range(1, m - 1)]
    v = np.column_stack(cols)
    weight = np.concatenate([np.ones(m), np.full(m, 1 / size)])[:, None]

    def rhs(o, e, dv):
        out = np.empty_like(dv)
        out[:m] = 2 * dv[m:]
        out[m:] = -2 * (e @ e) * dv[:m] - 4 * np.outer(o, e @ dv[m:])
        return out

    def base(o, e):
        return 2 * e, -2 * (e @ e) * o

    logs = [math.log(np.linalg.norm(weight * v, 2))]
    h = dt
    for _ in range(n_steps):
        a1, b1 = base(om, et)
        c1 = rhs(om, et, v)
        o2, e2 = om + h / 2 * a1, et + h / 2 * b1
        a2, b2 = base(o2, e2)
        c2 = rhs(o2, e2, v + h / 2 * c1)
        o3, e3 = om + h / 2 * a2, et + h / 2 * b2
        a3, b3 = base(o3, e3)
        c3 = rhs(o3, e3, v + h / 2 * c2)
        o4, e4 = om + h * a3, et + h * b3
        a4, b4 = base(o4, e4)
        c4 = rhs(o4, e4, v + h * c3)
        om = om + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        et = et + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
        v = v + h / 6 * (c1 + 2 * c2 + 2 * c3 + c4)
        om /= np.linalg.norm(om)
        et -= (et @ om) * om
        et *= size / np.linalg.norm(et)
        v[:m] -= np.outer(om, om @ v[:m])
        v[m:] -= np.outer(et, et @ v[m:]) / size**2
        v[m:] -= np.outer(om, om @ v[m:] + et @ v[:m])
        logs.append(math.log(np.linalg.norm(weight * v, 2)))
    return np.array(logs)


@pytest.mark.parametrize("n", [4, 6])
def test_tangential_propagator_matches_stepwise_integration(n, rng):
    p = sm.SdsParams.from_lambda(n, 1.0, 0.01)
    x0 = hf.trapped_point(p, unit(rng.normal(size=n - 1)), rng.normal(size=n - 1))
    steps, logs = hf._tangential_log_norms(x0, 3000, 1e-3, stride=10)
    direct = stepwise_tangential(x0, 3000, 1e-3)
    np.testing.assert_allclose(logs, direct[steps], atol=1e-10)
