"""Closed-form geometry of n-dimensional Schwarzschild–de Sitter space.

The static metric is ``g = μ dt² - (μ⁻¹ dr² + r² dω²)`` with

    μ(r) = 1 - 2M / r^(n-3) - λ r²,    λ = 2Λ / ((n-2)(n-1)),

on ``R_t × (r_-, r_+) × S^(n-2)``.  Everything here is a pure function of an
immutable :class:`SdsParams`.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError, InputError, NoHorizonError
from . import sphere

ROOT_RTOL = 1e-13


@dataclass(frozen=True)
class SdsParams:
    """Spacetime dimension ``n``, black hole mass ``mass`` and cosmological constant ``Lambda``."""

    n: int
    mass: float
    Lambda: float

    def __post_init__(self):
        vals = (self.n, self.mass, self.Lambda)
        if not all(isinstance(v, (int, float, np.integer, np.floating)) for v in vals):
            raise InputError("n, mass and Lambda must be real numbers")
        if not all(math.isfinite(v) for v in vals):
            raise InputError(f"non-finite parameter in {vals!r}")
        if int(self.n) != self.n or self.n < 4:
            raise InputError(f"dimension n must be an integer >= 4, got {self.n!r}")
        if self.mass <= 0 or self.Lambda <= 0:
            raise InputError("mass and Lambda must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "Lambda", float(self.Lambda))

    @classmethod
    def from_lambda(cls, n, mass, lambda_small):
        """Build parameters from the normalized constant ``λ`` instead of ``Λ``."""
        return cls(n, mass, lambda_small * (n - 2) * (n - 1) / 2.0)

    @property
    def lambda_small(self):
        return 2.0 * self.Lambda / ((self.n - 2) * (self.n - 1))

    @property
    def r_photon(self):
        """``r_p = ((n-1) M)^(1/(n-3))``, the unique critical point of ``μ/r²``."""
        return ((self.n - 1) * self.mass) ** (1.0 / (self.n - 3))


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    margin: float
    lhs: float
    rhs: float

    def __bool__(self):
        return self.valid


@dataclass(frozen=True)
class MetricValues:
    """Metric scalars at one radius; ``alpha`` fields are ``None`` where ``mu <= 0``."""

    r: float
    mu: float
    mu_prime: float
    tilde_mu: float
    tilde_mu_prime: float
    delta_r: float
    alpha: float | None
    alpha_prime: float | None


@dataclass(frozen=True)
class ChristoffelTable:
    """Christoffel symbols ``table[k, i, j] = Γ^k_ij`` at a base point.

    ``labels`` names each coordinate slot, e.g. ``("t", "r", "theta1", ...)``;
    angular slots are gnomonic coordinates on the sphere centered at
    ``chart_center`` with tangent frame ``chart_frame``.
    """

    table: np.ndarray
    labels: tuple
    coords: np.ndarray
    chart_center: np.ndarray
    chart_frame: np.ndarray

    def __getitem__(self, key):
        return self.table[key]

    def symmetry_defect(self):
        return float(np.max(np.abs(self.table - np.swapaxes(self.table, 1, 2))))


def validate_params(p):
    """Check the nondegeneracy condition ``M² λ^(n-3) < (n-3)^(n-3) / (n-1)^(n-1)``.

    Returns a :class:`ValidityReport` whose ``margin`` is ``rhs - lhs``.
    """
    n = p.n
    lhs = p.mass**2 * p.lambda_small ** (n - 3)
    rhs = (n - 3) ** (n - 3) / (n - 1) ** (n - 1)
    if not (math.isfinite(lhs) and math.isfinite(rhs)):
        raise InputError("non-finite nondegeneracy test")
    return ValidityReport(lhs < rhs, rhs - lhs, lhs, rhs)


def _require_positive_r(r):
    if not math.isfinite(r) or r <= 0:
        raise DomainError(f"radius must be positive and finite, got {r!r}")


def mu(p, r):
    return 1.0 - 2.0 * p.mass / r ** (p.n - 3) - p.lambda_small * r * r


def mu_prime(p, r):
    return 2.0 * (p.n - 3) * p.mass / r ** (p.n - 2) - 2.0 * p.lambda_small * r


def tilde_mu(p, r):
    """``μ / r² = r⁻² - 2M r^(1-n) - λ``."""
    return r**-2 - 2.0 * p.mass * r ** (1 - p.n) - p.lambda_small


def _photon_factor(p, r):
    # (r^(n-3) - r_p^(n-3)) / (r - r_p), so the product below vanishes exactly at r = r_p.
    rp = p.r_photon
    return sum(r**k * rp ** (p.n - 4 - k) for k in range(p.n - 3))


def tilde_mu_prime(p, r):
    """``(μ/r²)' = -2 r^(-n) (r^(n-3) - (n-1)M)``, factored through ``r - r_p``."""
    return -2.0 * r ** (-p.n) * (r - p.r_photon) * _photon_factor(p, r)


def tilde_mu_second(p, r):
    return 6.0 * r**-4 - 2.0 * p.n * (p.n - 1) * p.mass * r ** (-p.n - 1)


def delta_r(p, r):
    """``Δ_r = r² μ``."""
    return r * r * mu(p, r)


def delta_r_prime(p, r):
    return 2.0 * r - 4.0 * p.lambda_small * r**3 - 2.0 * (5 - p.n) * p.mass * r ** (4 - p.n)


def delta_r_second(p, r):
    return 2.0 - 12.0 * p.lambda_small * r**2 - 2.0 * (5 - p.n) * (4 - p.n) * p.mass * r ** (3 - p.n)


def metric_values(p, r):
    """All metric scalars at radius ``r``."""
    _require_positive_r(r)
    m = mu(p, r)
    mp = mu_prime(p, r)
    if m > 0:
        a = math.sqrt(m)
        ap = 0.5 * mp / a
    else:
        a = ap = None
    return MetricValues(
        r=float(r),
        mu=m,
        mu_prime=mp,
        tilde_mu=tilde_mu(p, r),
        tilde_mu_prime=tilde_mu_prime(p, r),
        delta_r=r * r * m,
        alpha=a,
        alpha_prime=ap,
    )


def _bracketed_root(f, fprime, lo, hi, rtol=ROOT_RTOL):
    """Root of ``f`` in ``[lo, hi]`` by bisection, polished with guarded Newton steps."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise NoHorizonError("bracket does not contain a sign change")
    while hi - lo > 1e-6 * max(abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if fm * flo < 0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    x = 0.5 * (lo + hi)
    for _ in range(60):
        fx = f(x)
        if fx == 0.0:
            return x
        if fx * flo < 0:
            hi = x
        else:
            lo, flo = x, fx
        d = fprime(x)
        step = fx / d if d != 0.0 else math.inf
        x_new = x - step
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= rtol * abs(x):
            return x_new
        x = x_new
    return x


def horizons(p):
    """Black hole and cosmological horizons ``(r_-, r_+)``, the positive roots of ``μ``.

    Raises :class:`NoHorizonError` if the nondegeneracy condition fails.
    """
    report = validate_params(p)
    if not report.valid:
        raise NoHorizonError(
            f"nondegeneracy violated: M²λ^(n-3) = {report.lhs:.6g} >= {report.rhs:.6g}"
        )
    rp = p.r_photon
    # μ/r² is increasing on (0, r_p), decreasing on (r_p, ∞), negative at the
    # Schwarzschild radius (2M)^(1/(n-3)) < r_p and at 2 λ^(-1/2).
    r_s = (2.0 * p.mass) ** (1.0 / (p.n - 3))
    r_big = 2.0 / math.sqrt(p.lambda_small)
    f = lambda r: tilde_mu(p, r)
    fp = lambda r: tilde_mu_prime(p, r)
    return _bracketed_root(f, fp, r_s, rp), _bracketed_root(f, fp, rp, r_big)


def photon_sphere(p):
    """Photon sphere radius ``r_p`` and ``Ψ_p = α(r_p)/r_p``."""
    report = validate_params(p)
    if not report.valid:
        raise NoHorizonError("nondegeneracy violated: no static region around r_p")
    rp = p.r_photon
    return rp, math.sqrt(mu(p, rp)) / rp


def beta_pm(p):
    """``(β_-(r_-), β_+(r_+))`` with ``β_± = ∓2/μ'``; both are positive."""
    rm, rpl = horizons(p)
    return 2.0 / mu_prime(p, rm), -2.0 / mu_prime(p, rpl)


def _chart(omega, chart_center):
    omega = sphere.as_unit(omega)
    center = sphere.default_chart_center(omega) if chart_center is None else sphere.as_unit(chart_center)
    theta, frame = sphere.gnomonic_coordinates(omega, center)
    return theta, center, frame


def _require_static(p, r):
    _require_positive_r(r)
    mv = metric_values(p, r)
    if mv.alpha is None:
        raise DomainError(f"mu(r) = {mv.mu:.6g} <= 0 at r = {r!r}; outside the static region")
    return mv


def _spatial_table(mv, theta):
    d = theta.size + 1
    r, a, ap = mv.r, mv.alpha, mv.alpha_prime
    gam = np.zeros((d, d, d))
    gam[0, 0, 0] = -ap / a
    gam[0, 1:, 1:] = -r * a * a * sphere.gnomonic_metric(theta)
    for k in range(1, d):
        gam[k, k, 0] = gam[k, 0, k] = 1.0 / r
    gam[1:, 1:, 1:] = sphere.gnomonic_christoffel(theta)
    return gam


def christoffel_spatial(p, r, omega, chart_center=None):
    """Christoffel symbols of ``h = α⁻² dr² + r² dω²`` at ``(r, ω)``.

    Coordinates are ``(r, θ_1, ..., θ_{n-2})`` with ``θ`` gnomonic around
    ``chart_center`` (default: the signed coordinate axis nearest ``omega``).
    """
    mv = _require_static(p, r)
    theta, center, frame = _chart(omega, chart_center)
    labels = ("r",) + tuple(f"theta{i + 1}" for i in range(theta.size))
    return ChristoffelTable(
        _spatial_table(mv, theta), labels, np.concatenate([[r], theta]), center, frame
    )


def christoffel_spacetime(p, r, omega, chart_center=None):
    """Christoffel symbols of ``g = α² dt² - h`` at ``(t, r, ω)`` (any ``t``).

    Coordinates are ``(t, r, θ_1, ..., θ_{n-2})``; slot 0 is time.
    """
    mv = _require_static(p, r)
    theta, center, frame = _chart(omega, chart_center)
    d = p.n
    a, ap = mv.alpha, mv.alpha_prime
    gam = np.zeros((d, d, d))
    gam[0, 1, 0] = gam[0, 0, 1] = ap / a
    gam[1, 0, 0] = a * (a * a) * ap
    gam[1:, 1:, 1:] = _spatial_table(mv, theta)
    labels = ("t", "r") + tuple(f"theta{i + 1}" for i in range(theta.size))
    return ChristoffelTable(gam, labels, np.concatenate([[0.0, r], theta]), center, frame)


def spatial_metric(p, coords):
    """``h_ij`` in the ``(r, θ)`` chart; used by finite-difference checks."""
    r, theta = coords[0], np.asarray(coords[1:])
    d = theta.size + 1
    h = np.zeros((d, d))
    h[0, 0] = 1.0 / mu(p, r)
    h[1:, 1:] = r * r * sphere.gnomonic_metric(theta)
    return h


def spacetime_metric(p, coords):
    """``g_μν`` in the ``(t, r, θ)`` chart."""
    r = coords[1]
    d = len(coords)
    g = np.zeros((d, d))
    g[0, 0] = mu(p, r)
    g[1:, 1:] = -spatial_metric(p, coords[1:])
    return g
