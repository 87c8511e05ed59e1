"""Null-geodesic dynamics at high frequency on Schwarzschild–de Sitter.

Phase space is T*X with X = (r_-, r_+) × S^(n-2); covectors are written
``ξ dr + η dω``.  The rescaled symbol is

    p = Δ_r ξ² - (r⁴/Δ_r) z² + |η|²,     z = ±1,

whose Hamilton flow splits into a planar radial system in ``(r, ξ)`` and the
geodesic flow of the round sphere.  The trapped set is

    Γ = {r = r_p, ξ = 0, |η|² = r_p⁴ z² / Δ_r(r_p)}.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from . import sds_metric as sm
from . import sphere
from .errors import DomainError, InputError


class AccuracyWarning(UserWarning):
    """A numerical estimate was requested with too little data to be reliable."""


@dataclass(frozen=True)
class PhasePoint:
    """Point ``(r, ω; ξ, η)`` of T*X together with the frequency sign ``z``."""

    r: float
    omega: np.ndarray
    xi: float
    eta: np.ndarray
    z: float = 1.0

    def __post_init__(self):
        omega = np.array(self.omega, dtype=float)
        eta = np.array(self.eta, dtype=float)
        if omega.shape != eta.shape or omega.ndim != 1:
            raise InputError("omega and eta must be vectors of the same length")
        if not (math.isfinite(self.r) and math.isfinite(self.xi) and np.all(np.isfinite(eta))):
            raise InputError("non-finite phase point")
        if abs(np.linalg.norm(omega) - 1.0) > 1e-12:
            raise InputError("omega must be a unit vector")
        if abs(omega @ eta) > 1e-12 * max(np.linalg.norm(eta), 1e-300):
            raise InputError("eta must be orthogonal to omega")
        if self.z not in (1, -1):
            raise InputError("z must be +1 or -1")
        omega.setflags(write=False)
        eta.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "xi", float(self.xi))
        object.__setattr__(self, "z", float(self.z))

    @property
    def eta_norm(self):
        return float(np.linalg.norm(self.eta))


@dataclass(frozen=True)
class HamiltonField:
    dr: float
    dxi: float
    domega: np.ndarray
    deta: np.ndarray


@dataclass
class Trajectory:
    """Samples of an integral curve of ``H_p``.

    ``omega`` and ``eta`` have one row per sample.  When the variational flow
    was requested, ``variational[k]`` is the normalized 2×2 ``(r, ξ)``
    propagator and ``variational_log_scale[k]`` the log of its discarded scale,
    so the true propagator is ``exp(scale) * variational``.
    """

    times: np.ndarray
    r: np.ndarray
    xi: np.ndarray
    omega: np.ndarray
    eta: np.ndarray
    z: float
    p_values: np.ndarray
    exited: bool = False
    exit_side: str | None = None
    exit_time: float | None = None
    variational: np.ndarray | None = None
    variational_log_scale: np.ndarray | None = None

    @property
    def p_drift(self):
        return float(np.max(np.abs(self.p_values - self.p_values[0])))

    @property
    def eta_drift(self):
        norms = np.linalg.norm(self.eta, axis=1)
        return float(np.max(np.abs(norms - norms[0])))

    def variational_log_norms(self):
        """``log ||V(t)||₂`` of the unnormalized ``(r, ξ)`` propagator."""
        if self.variational is None:
            raise ValueError("trajectory was integrated without the variational flow")
        return self.variational_log_scale + np.log(np.linalg.norm(self.variational, ord=2, axis=(1, 2)))

    def point(self, k):
        return PhasePoint(self.r[k], self.omega[k], self.xi[k], self.eta[k], self.z)

    def __len__(self):
        return len(self.times)


class _Radial:
    """Coefficients of the radial system with the parameters cached as floats.

    Same formulas as :mod:`sds_metric`, inlined because the integrators call
    them hundreds of thousands of times.  ``u = r⁴/Δ_r = 1/μ̃``.
    """

    def __init__(self, p):
        self.p = p
        self.n = p.n
        self.mass = p.mass
        self.lam = p.lambda_small
        self.rp = p.r_photon
        self._rp_pows = [self.rp ** (p.n - 4 - k) for k in range(p.n - 3)]

    def delta(self, r):
        return r * r * (1.0 - 2.0 * self.mass / r ** (self.n - 3) - self.lam * r * r)

    def delta_prime(self, r):
        n, m = self.n, self.mass
        return 2.0 * r - 4.0 * self.lam * r**3 - 2.0 * (5 - n) * m * r ** (4 - n)

    def delta_second(self, r):
        n, m = self.n, self.mass
        return 2.0 - 12.0 * self.lam * r * r - 2.0 * (5 - n) * (4 - n) * m * r ** (3 - n)

    def _tm(self, r):
        return r**-2 - 2.0 * self.mass * r ** (1 - self.n) - self.lam

    def _tm_prime(self, r):
        fac = 0.0
        rk = 1.0
        for c in self._rp_pows:
            fac += rk * c
            rk *= r
        return -2.0 * r ** (-self.n) * (r - self.rp) * fac

    def u_prime(self, r):
        tm = self._tm(r)
        return -self._tm_prime(r) / (tm * tm)

    def u_second(self, r):
        n = self.n
        tm = self._tm(r)
        tmp = self._tm_prime(r)
        tmpp = 6.0 * r**-4 - 2.0 * n * (n - 1) * self.mass * r ** (-n - 1)
        return -tmpp / (tm * tm) + 2.0 * tmp * tmp / (tm * tm * tm)

    def rhs(self, r, xi, z2):
        return (
            2.0 * self.delta(r) * xi,
            -self.delta_prime(r) * xi * xi + self.u_prime(r) * z2,
        )

    def rhs_jac(self, r, xi, z2):
        """``rhs`` and ``jacobian`` in one pass (shared powers of ``r``)."""
        n, m, lam = self.n, self.mass, self.lam
        r2 = r * r
        rpow = r ** (3 - n)  # r^(3-n)
        delta = r2 * (1.0 - 2.0 * m * rpow - lam * r2)
        d1 = 2.0 * r - 4.0 * lam * r2 * r - 2.0 * (5 - n) * m * rpow * r
        d2 = 2.0 - 12.0 * lam * r2 - 2.0 * (5 - n) * (4 - n) * m * rpow
        tm = self._tm(r)
        tmp = self._tm_prime(r)
        tmpp = 6.0 / (r2 * r2) - 2.0 * n * (n - 1) * m * rpow / (r2 * r2)
        up = -tmp / (tm * tm)
        upp = -tmpp / (tm * tm) + 2.0 * tmp * tmp / (tm * tm * tm)
        return (
            2.0 * delta * xi,
            -d1 * xi * xi + up * z2,
            2.0 * d1 * xi,
            2.0 * delta,
            -d2 * xi * xi + upp * z2,
            -2.0 * d1 * xi,
        )

    def jacobian(self, r, xi, z2):
        d1 = self.delta_prime(r)
        return (
            2.0 * d1 * xi,
            2.0 * self.delta(r),
            -self.delta_second(r) * xi * xi + self.u_second(r) * z2,
            -2.0 * d1 * xi,
        )


def _check_delta(p, r):
    if not math.isfinite(r) or r <= 0:
        raise DomainError(f"radius must be positive, got {r!r}")
    d = sm.delta_r(p, r)
    if d == 0.0:
        raise DomainError(f"Δ_r vanishes at r = {r!r} (horizon)")
    return d


def symbol_p(p, x):
    """Semiclassical principal symbol ``Δ_r ξ² - (r⁴/Δ_r) z² + |η|²``."""
    d = _check_delta(p, x.r)
    return d * x.xi**2 - x.r**4 / d * x.z**2 + float(x.eta @ x.eta)


def hamilton_field(p, x):
    """Components of ``H_p`` at ``x``.

    The sphere part is the Hamilton field of ``|η|²`` in the embedding,
    ``dω = 2η``, ``dη = -2|η|² ω``.
    """
    _check_delta(p, x.r)
    dr, dxi = _Radial(p).rhs(x.r, x.xi, x.z**2)
    return HamiltonField(dr, dxi, 2.0 * x.eta, -2.0 * float(x.eta @ x.eta) * x.omega)


def escape_derivatives(p, x):
    """``(H_p F, H_p² F)`` for the escape function ``F = (r - r_p)²``."""
    _check_delta(p, x.r)
    rad = _Radial(p)
    z2 = x.z**2
    dr, dxi = rad.rhs(x.r, x.xi, z2)
    h2r = 2.0 * rad.delta_prime(x.r) * dr * x.xi + 2.0 * rad.delta(x.r) * dxi
    dist = x.r - p.r_photon
    return 2.0 * dist * dr, 2.0 * dr * dr + 2.0 * dist * h2r


def trapped_point(p, omega, eta_dir, z=1):
    """The point of ``Γ`` over ``omega`` with covector along ``eta_dir``."""
    omega = sphere.as_unit(omega)
    eta_dir = np.asarray(eta_dir, dtype=float)
    tang = sphere.project_tangent(omega, eta_dir)
    if np.linalg.norm(tang) <= 1e-12 * np.linalg.norm(eta_dir):
        raise InputError("eta_dir must not be parallel to omega")
    if z not in (1, -1):
        raise InputError("z must be +1 or -1")
    rp = p.r_photon
    d = _check_delta(p, rp)
    if d <= 0:
        raise DomainError("photon sphere lies outside the static region")
    size = rp * rp * abs(z) / math.sqrt(d)
    return PhasePoint(rp, omega, 0.0, size * tang / np.linalg.norm(tang), z)


def exit_window(p, margin_fraction=1e-3):
    rm, rpl = sm.horizons(p)
    m = margin_fraction * (rpl - rm)
    return rm + m, rpl - m


def integrate(p, x0, T, dt, with_variational=False, margin_fraction=1e-3):
    """Integrate ``H_p`` from ``x0`` over ``[0, T]`` with classical fixed-step RK4.

    After every step ``ω`` is renormalized and ``η`` is projected back onto the
    invariant set ``{η ⊥ ω, |η| = |η(0)|}`` (``|η|²`` Poisson-commutes with
    ``p``).  Integration stops when ``r`` leaves
    ``(r_- + m, r_+ - m)``, ``m = margin_fraction·(r_+ - r_-)``; the
    trajectory then keeps only the samples inside and records the exit side.

    Near the horizons ``ξ`` blows up like ``r²/Δ_r``, so the last few steps of
    an escaping orbit are not resolved by a fixed step; check ``p_values``
    before trusting samples with large ``|ξ|``.
    """
    if not (dt > 0 and T >= 0):
        raise InputError("need dt > 0 and T >= 0")
    lo, hi = exit_window(p, margin_fraction)
    if not lo < x0.r < hi:
        raise DomainError(f"initial radius {x0.r!r} outside ({lo:.6g}, {hi:.6g})")
    n_steps = int(math.floor(T / dt + 1e-9))
    rad = _Radial(p)
    z2 = x0.z**2
    m = x0.omega.size
    eta_size = x0.eta_norm

    times = np.empty(n_steps + 1)
    rs = np.empty(n_steps + 1)
    xis = np.empty(n_steps + 1)
    omegas = np.empty((n_steps + 1, m))
    etas = np.empty((n_steps + 1, m))
    if with_variational:
        vs = np.empty((n_steps + 1, 2, 2))
        scales = np.empty(n_steps + 1)
        v = (1.0, 0.0, 0.0, 1.0)
        scale = 0.0
        vs[0], scales[0] = np.eye(2), 0.0

    r, xi = x0.r, x0.xi
    om, et = x0.omega.copy(), x0.eta.copy()
    times[0], rs[0], xis[0], omegas[0], etas[0] = 0.0, r, xi, om, et
    exited, side, exit_time = False, None, None
    h, h2, h6 = dt, 0.5 * dt, dt / 6.0
    k = 0
    for k in range(1, n_steps + 1):
        # radial part (with the linearized flow, if requested)
        if with_variational:
            a1, b1, p11, p12, p21, p22 = rad.rhs_jac(r, xi, z2)
            r2, x2 = r + h2 * a1, xi + h2 * b1
            a2, b2, q11, q12, q21, q22 = rad.rhs_jac(r2, x2, z2)
            r3, x3 = r + h2 * a2, xi + h2 * b2
            a3, b3, s11, s12, s21, s22 = rad.rhs_jac(r3, x3, z2)
            r4, x4 = r + h * a3, xi + h * b3
            a4, b4, w11, w12, w21, w22 = rad.rhs_jac(r4, x4, z2)
        else:
            a1, b1 = rad.rhs(r, xi, z2)
            r2, x2 = r + h2 * a1, xi + h2 * b1
            a2, b2 = rad.rhs(r2, x2, z2)
            r3, x3 = r + h2 * a2, xi + h2 * b2
            a3, b3 = rad.rhs(r3, x3, z2)
            r4, x4 = r + h * a3, xi + h * b3
            a4, b4 = rad.rhs(r4, x4, z2)
        if with_variational:
            # 2×2 linearized flow in scalar arithmetic (much faster than tiny arrays)
            va, vb, vc, vd = v
            k1a, k1b = p11 * va + p12 * vc, p11 * vb + p12 * vd
            k1c, k1d = p21 * va + p22 * vc, p21 * vb + p22 * vd
            ua, ub, uc, ud = va + h2 * k1a, vb + h2 * k1b, vc + h2 * k1c, vd + h2 * k1d
            k2a, k2b = q11 * ua + q12 * uc, q11 * ub + q12 * ud
            k2c, k2d = q21 * ua + q22 * uc, q21 * ub + q22 * ud
            ua, ub, uc, ud = va + h2 * k2a, vb + h2 * k2b, vc + h2 * k2c, vd + h2 * k2d
            k3a, k3b = s11 * ua + s12 * uc, s11 * ub + s12 * ud
            k3c, k3d = s21 * ua + s22 * uc, s21 * ub + s22 * ud
            ua, ub, uc, ud = va + h * k3a, vb + h * k3b, vc + h * k3c, vd + h * k3d
            k4a, k4b = w11 * ua + w12 * uc, w11 * ub + w12 * ud
            k4c, k4d = w21 * ua + w22 * uc, w21 * ub + w22 * ud
            va += h6 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
            vb += h6 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
            vc += h6 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
            vd += h6 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
            # Frobenius renormalization; the spectral norm is restored at the end
            nv = math.sqrt(va * va + vb * vb + vc * vc + vd * vd)
            v = (va / nv, vb / nv, vc / nv, vd / nv)
            scale += math.log(nv)
        r = r + h6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        xi = xi + h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)

        # sphere part: ω' = 2η, η' = -2|η|²ω
        e2 = et @ et
        c1, d1 = 2.0 * et, -2.0 * e2 * om
        o2, t2 = om + h2 * c1, et + h2 * d1
        c2, d2 = 2.0 * t2, -2.0 * (t2 @ t2) * o2
        o3, t3 = om + h2 * c2, et + h2 * d2
        c3, d3 = 2.0 * t3, -2.0 * (t3 @ t3) * o3
        o4, t4 = om + h * c3, et + h * d3
        c4, d4 = 2.0 * t4, -2.0 * (t4 @ t4) * o4
        om = om + h6 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        et = et + h6 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        om /= np.linalg.norm(om)
        et -= (et @ om) * om
        ne = np.linalg.norm(et)
        if ne > 0.0:
            et *= eta_size / ne

        if not lo < r < hi:
            exited = True
            # the last step may overshoot the horizon pole arbitrarily; r moves
            # like sign(ξ) inside, so the last accepted ξ fixes the side
            prev_xi = xis[k - 1]
            if prev_xi != 0.0:
                side = "plus" if prev_xi > 0 else "minus"
            else:
                side = "minus" if r <= lo else "plus"
            exit_time = k * dt
            k -= 1
            break
        times[k], rs[k], xis[k], omegas[k], etas[k] = k * dt, r, xi, om, et
        if with_variational:
            vs[k], scales[k] = np.reshape(v, (2, 2)), scale
    count = k + 1
    rs_c, xis_c, etas_c = rs[:count], xis[:count], etas[:count]
    deltas = sm.delta_r(p, rs_c)
    pvals = deltas * xis_c**2 - rs_c**4 / deltas * z2 + np.einsum("ij,ij->i", etas_c, etas_c)
    return Trajectory(
        times=times[:count],
        r=rs_c,
        xi=xis_c,
        omega=omegas[:count],
        eta=etas_c,
        z=x0.z,
        p_values=pvals,
        exited=exited,
        exit_side=side,
        exit_time=exit_time,
        variational=vs[:count] if with_variational else None,
        variational_log_scale=scales[:count] if with_variational else None,
    )


@dataclass(frozen=True)
class Linearization:
    """Linearized radial flow at ``Γ`` in the normal coordinates ``(r - r_p, ξ)``."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvalue_closed_form: float
    nu_min_closed_form: float

    @property
    def positive_eigenvalue(self):
        return float(np.max(self.eigenvalues.real))


def linearization(p, z=1):
    """Linearization of the ``H_p`` flow at ``Γ`` and its eigenvalues.

    Returns the numerically computed eigenvalues of the 2×2 matrix, the closed
    form ``2 r_p ((n-1)/(1 - (n-1)/(n-3) r_p² λ))^(1/2)`` and the closed form
    ``2 r_p⁻¹ (...)^(1/2)`` stated for the minimal normal expansion rate.  The
    two closed forms differ by the factor ``r_p²`` and are both reported.
    """
    if z not in (1, -1):
        raise InputError("z must be +1 or -1")
    n, rp, lam = p.n, p.r_photon, p.lambda_small
    tm = sm.tilde_mu(p, rp)
    if tm <= 0:
        raise DomainError("μ̃(r_p) <= 0: nondegeneracy violated")
    mat = np.array(
        [[0.0, 2.0 * rp**4 * tm], [2.0 * (n - 3) * rp**-4 * tm**-2 * z * z, 0.0]]
    )
    eig = np.sort(np.linalg.eigvals(mat))
    root = math.sqrt((n - 1) / (1.0 - (n - 1) / (n - 3) * rp * rp * lam))
    return Linearization(mat, eig, 2.0 * rp * root, 2.0 / rp * root)


@dataclass
class LyapunovResult:
    rate: float
    tangential_rate: float
    eigenvalue: float
    nu_min: float
    times: np.ndarray
    log_norms: np.ndarray
    tangential_times: np.ndarray = field(repr=False)
    tangential_log_norms: np.ndarray = field(repr=False)

    @property
    def relative_error(self):
        return abs(self.rate - self.eigenvalue) / self.eigenvalue


def _regression_slope(t, y, discard=0.2):
    start = int(math.floor(discard * len(t)))
    tt, yy = t[start:], y[start:]
    if len(tt) < 2:
        return float("nan")
    return float(np.polyfit(tt, yy, 1)[0])


def _tangential_log_norms(x0, n_steps, dt, stride=10):
    """Linearized sphere flow along the ``Γ`` orbit of ``x0``, restricted to ``T Γ``.

    Variations ``(δω, δη)`` start in a basis ``V₀`` of the tangent space of
    ``{|ω| = 1, η·ω = 0, |η| = const}`` and are measured in the norm
    ``|δω|² + |δη|²/|η|²``, in which geodesic rotation is an isometry.

    The RK4 step with its projections commutes with rotations of the sphere,
    and on ``Γ`` it advances the base point by a fixed planar rotation ``R``.
    Hence the ``k``-step variational propagator is ``R^k V₀ C^k``, where
    ``R V₀ C`` is the propagated basis after one step.  One step is
    integrated to get ``C``; the log-norm is recorded every ``stride`` steps
    from its powers.  Returns ``(steps, log_norms)``.
    """
    om, et = x0.omega.copy(), x0.eta.copy()
    m = om.size
    size = x0.eta_norm
    frame = sphere.tangent_frame(om, lead=et)  # columns: η̂, then {ω, η}^⊥
    cols = []
    for i in range(m - 1):
        e = frame[:, i]
        cols.append(np.concatenate([e, -(et @ e) * om]))
    for i in range(1, m - 1):
        cols.append(np.concatenate([np.zeros(m), size * frame[:, i]]))
    basis = np.column_stack(cols)
    # column 0 carries the base point (ω; η), the others the variations (δω; δη)
    y = np.column_stack([np.concatenate([om, et]), basis])
    weight = np.concatenate([np.ones(m), np.full(m, 1.0 / size)])[:, None]

    def f(y):
        o, e = y[:m, 0], y[m:, 0]
        out = np.empty_like(y)
        out[:m] = 2.0 * y[m:]
        out[m:] = (-2.0 * (e @ e)) * y[:m]
        out[m:, 1:] -= 4.0 * np.outer(o, e @ y[m:, 1:])
        return out

    h, h2, h6 = dt, 0.5 * dt, dt / 6.0
    k1 = f(y)
    k2 = f(y + h2 * k1)
    k3 = f(y + h2 * k2)
    k4 = f(y + h * k3)
    y = y + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    om1 = y[:m, 0] / np.linalg.norm(y[:m, 0])
    et1 = y[m:, 0] - (y[m:, 0] @ om1) * om1
    et1 *= size / np.linalg.norm(et1)
    # keep the variations tangent to the shell: δω ⊥ ω, δη ⊥ η, δη·ω = -η·δω
    dw, de = y[:m, 1:], y[m:, 1:]
    dw -= np.outer(om1, om1 @ dw)
    de -= np.outer(et1, et1 @ de) / (size * size)
    de -= np.outer(om1, om1 @ de + et1 @ dw)

    # planar rotation taking (ω, η̂) to (ω₁, η̂₁), identity on the complement
    u0, v0 = om, et / size
    u1, v1 = om1, et1 / size
    rot = np.eye(m) + np.outer(u1 - u0, u0) + np.outer(v1 - v0, v0)
    rot2 = np.kron(np.eye(2), rot)
    step = np.linalg.lstsq(weight * (rot2 @ basis), weight * y[:, 1:], rcond=None)[0]

    steps = np.arange(0, n_steps + 1, stride)
    out = np.empty(len(steps))
    wb = weight * basis
    power = np.eye(step.shape[0])
    jump = np.linalg.matrix_power(step, stride)
    for j in range(len(steps)):
        out[j] = math.log(np.linalg.norm(wb @ power, ord=2))
        power = jump @ power
    return steps, out


def lyapunov_normal(p, T=50.0, dt=1e-3, omega=None, eta_dir=None, z=1, min_samples=200):
    """Numerical normal and tangential expansion rates along a ``Γ`` orbit.

    The normal rate is the slope of a least-squares fit of ``log ||V(t)||``
    (first 20% of samples discarded), ``V`` being the linearized ``(r, ξ)``
    propagator co-integrated with the orbit.  The tangential rate is the same
    fit for the linearized sphere flow restricted to the trapped set.
    """
    m = p.n - 1
    if omega is None:
        omega = np.zeros(m)
        omega[-1] = 1.0
    if eta_dir is None:
        eta_dir = np.zeros(m)
        eta_dir[0] = 1.0
    x0 = trapped_point(p, omega, eta_dir, z)
    n_steps = int(math.floor(T / dt + 1e-9))
    if 0.8 * (n_steps + 1) < min_samples:
        warnings.warn(
            f"T={T} with dt={dt} leaves fewer than {min_samples} samples for the fit",
            AccuracyWarning,
            stacklevel=2,
        )
    traj = integrate(p, x0, T, dt, with_variational=True)
    if traj.exited:
        raise DomainError("trapped orbit escaped; cannot estimate the normal rate")
    logn = traj.variational_log_norms()
    tang_steps, tang = _tangential_log_norms(x0, n_steps, dt)
    lin = linearization(p, z)
    return LyapunovResult(
        rate=_regression_slope(traj.times, logn),
        tangential_rate=_regression_slope(tang_steps * dt, tang),
        eigenvalue=lin.positive_eigenvalue,
        nu_min=lin.nu_min_closed_form,
        times=traj.times,
        log_norms=logn,
        tangential_times=tang_steps * dt,
        tangential_log_norms=tang,
    )


def escape_scan(p, n_r=100, n_xi=100, z=1, seed=0, hf_tol=1e-12, gamma_tol=1e-10):
    """Check the escape-function dichotomy on a grid of the characteristic set.

    Grid points are ``(r, ξ)`` with ``r`` uniform in the exit window (``r_p``
    included) and ``ξ = s r²/Δ_r``, ``s`` uniform in ``[-1, 1]`` (``0``
    included), so every point lifts to ``p = 0`` with
    ``|η|² = r⁴/Δ_r - Δ_r ξ² >= 0``; the sphere coordinates are drawn at random.
    At each point with ``H_p F = 0`` off ``Γ`` we require ``H_p² F > 0``.
    Returns the list of violations (empty on success).
    """
    lo, hi = exit_window(p)
    rp = p.r_photon
    r_grid = np.linspace(lo, hi, n_r)
    r_grid[np.argmin(np.abs(r_grid - rp))] = rp
    s_grid = np.linspace(-1.0, 1.0, n_xi)
    s_grid[np.argmin(np.abs(s_grid))] = 0.0
    rng = np.random.default_rng(seed)
    m = p.n - 1
    violations = []
    for r in r_grid:
        d = sm.delta_r(p, r)
        for s in s_grid:
            xi = s * r * r / d
            eta2 = max(r**4 / d - d * xi * xi, 0.0)
            om = rng.normal(size=m)
            om /= np.linalg.norm(om)
            et = sphere.project_tangent(om, rng.normal(size=m))
            et *= math.sqrt(eta2) / np.linalg.norm(et)
            x = PhasePoint(r, om, xi, et, z)
            hf, h2f = escape_derivatives(p, x)
            scale = max(1.0, abs(r - rp) * abs(2.0 * d * xi))
            if abs(hf) > hf_tol * scale:
                continue
            on_gamma = abs(r - rp) <= gamma_tol * rp and abs(xi) <= gamma_tol
            if on_gamma:
                continue
            if not h2f > 0:
                violations.append({"r": r, "xi": xi, "HpF": hf, "Hp2F": h2f})
    return violations


def sphere_transport(omega0, eta, t, v0):
    """Parallel transport of ``v0`` along the ``|η|²`` flow geodesic from ``omega0``.

    Solves ``dv/dt = -(v·ω̇) ω`` in closed form: the component of ``v0`` along
    ``η̂`` turns with the geodesic tangent, the rest is constant.
    """
    omega0 = sphere.as_unit(omega0)
    eta = np.asarray(eta, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if abs(omega0 @ eta) > 1e-12 * max(np.linalg.norm(eta), 1.0):
        raise InputError("eta must be tangent at omega0")
    if abs(omega0 @ v0) > 1e-12 * max(np.linalg.norm(v0), 1.0):
        raise InputError("v0 must be tangent at omega0")
    size = np.linalg.norm(eta)
    if size == 0.0:
        return v0.copy()
    ehat = eta / size
    _, eta_t = sphere.great_circle(omega0, eta, t)
    along = v0 @ ehat
    return (v0 - along * ehat) + along * eta_t / size
