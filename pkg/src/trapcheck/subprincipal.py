"""Fiber matrices of the 1-form wave operator at the trapped set.

A 1-form on the static region splits as ``u = u_TT + u_TN α⁻¹dr + u_N α dt``
(tangential-tangential, tangential-normal, normal).  At a point of the
spacetime trapped set the zeroth-order part of the subprincipal operator is a
constant multiple of a nilpotent matrix ``s`` (``s³ = 0``).  Rescaling the
frame by powers of ``ε`` conjugates ``s`` to a strictly upper triangular matrix
of size ``O(ε)``, which is what makes the imaginary part small.

All matrices are ``n × n`` in the ordered frame

    (η̂, e₂, …, e_{n-2};  TN;  N),

where ``η̂ = η/|η|`` and ``e_j`` complete an orthonormal basis of ``ω^⊥``.
"""

from dataclasses import dataclass
import math

import numpy as np
import scipy.linalg

from . import sds_metric as sm
from . import sphere
from .errors import InputError


@dataclass(frozen=True)
class FiberVector:
    """Complex 1-form fiber element ``(u_TT, u_TN, u_N)`` over ``omega``."""

    omega: np.ndarray
    tt: np.ndarray
    tn: complex
    nn: complex

    def __post_init__(self):
        omega = sphere.as_unit(self.omega)
        tt = np.asarray(self.tt, dtype=complex)
        if tt.shape != omega.shape:
            raise InputError("TT component must live in the embedding space of omega")
        if abs(omega @ tt) > 1e-12 * max(np.linalg.norm(tt), 1e-300):
            raise InputError("TT component must be orthogonal to omega")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "tt", tt)
        object.__setattr__(self, "tn", complex(self.tn))
        object.__setattr__(self, "nn", complex(self.nn))

    def to_frame(self, frame):
        """Coordinates in the ordered frame (``frame`` spans ``ω^⊥``)."""
        return np.concatenate([frame.T @ self.tt, [self.tn, self.nn]])

    @classmethod
    def from_frame(cls, omega, frame, coords):
        coords = np.asarray(coords, dtype=complex)
        return cls(omega, frame @ coords[:-2], coords[-2], coords[-1])


@dataclass(frozen=True)
class GammaPointData:
    """A point of the spacetime trapped set: ``r = r_p``, ``ξ = 0``, ``σ² = Ψ²|η|²``.

    ``eta`` may have any nonzero length (the symbols are homogeneous).  Pass
    ``strict=False`` to build deliberately off-``Γ`` data for comparisons.
    """

    params: sm.SdsParams
    omega: np.ndarray
    eta: np.ndarray
    sigma: float
    strict: bool = True

    def __post_init__(self):
        omega = sphere.as_unit(self.omega)
        eta = np.asarray(self.eta, dtype=float)
        if eta.shape != omega.shape:
            raise InputError("eta and omega must have the same length")
        if eta.size != self.params.n - 1:
            raise InputError(f"sphere vectors must have length n-1 = {self.params.n - 1}")
        size = np.linalg.norm(eta)
        if abs(omega @ eta) > 1e-12 * max(size, 1e-300):
            raise InputError("eta must be orthogonal to omega")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "sigma", float(self.sigma))
        if self.strict:
            target = (self.psi * size) ** 2
            if abs(self.sigma**2 - target) > 1e-12 * max(self.sigma**2, 1e-300):
                raise InputError("sigma² must equal Ψ²|η|² on the trapped set")

    @classmethod
    def on_gamma(cls, params, omega, eta, sign=1):
        """Trapped-set point over ``(omega, eta)`` with ``σ = sign·Ψ_p|η|``."""
        if sign not in (1, -1):
            raise InputError("sign must be +1 or -1")
        _, psi = sm.photon_sphere(params)
        return cls(params, omega, eta, sign * psi * float(np.linalg.norm(eta)))

    @classmethod
    def random(cls, params, rng, scale=(0.5, 2.0)):
        m = params.n - 1
        omega = rng.normal(size=m)
        omega /= np.linalg.norm(omega)
        eta = sphere.project_tangent(omega, rng.normal(size=m))
        eta *= rng.uniform(*scale) / np.linalg.norm(eta)
        return cls.on_gamma(params, omega, eta, sign=int(rng.choice([-1, 1])))

    def with_sigma(self, sigma):
        return GammaPointData(self.params, self.omega, self.eta, sigma, strict=False)

    @property
    def r(self):
        return self.params.r_photon

    @property
    def alpha(self):
        return math.sqrt(sm.mu(self.params, self.r))

    @property
    def psi(self):
        return self.alpha / self.r

    @property
    def eta_norm(self):
        return float(np.linalg.norm(self.eta))

    @property
    def n(self):
        return self.params.n

    def frame(self):
        """``(n-1) × (n-2)`` orthonormal frame of ``ω^⊥`` led by ``η̂``."""
        if self.eta_norm == 0.0:
            raise InputError("eta = 0: the η-adapted frame is undefined")
        return sphere.tangent_frame(self.omega, lead=self.eta)


@dataclass(frozen=True)
class OperatorMatrix:
    """Matrix in the ordered frame ``(TT frame columns; TN; N)`` over ``omega``."""

    matrix: np.ndarray
    frame: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.matrix)):
            raise InputError("non-finite operator matrix")

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def apply(self, v: FiberVector) -> FiberVector:
        return FiberVector.from_frame(self.omega, self.frame, self.matrix @ v.to_frame(self.frame))

    def frame_defect(self):
        k = self.frame.shape[1]
        return float(
            max(
                np.max(np.abs(self.frame.T @ self.frame - np.eye(k))),
                np.max(np.abs(self.omega @ self.frame)),
            )
        )


def _indices(n):
    # first TT slot (η̂), TN slot, N slot
    return 0, n - 2, n - 1


def s_entries(g):
    """The three scalars ``(Ψ r² |η|, Ψ |η|, r σ)`` that fill ``s``."""
    return g.psi * g.r**2 * g.eta_norm, g.psi * g.eta_norm, g.r * g.sigma


def s_matrix(g):
    """Nilpotent matrix ``s = [[0, Ψr²η, 0], [-Ψ i_η, 0, rσ], [0, rσ, 0]]``.

    ``η`` and ``i_η`` are the column and row of ``|η|`` along ``η̂``.
    """
    n = g.n
    tt, tn, nn = _indices(n)
    a, b, c = s_entries(g)
    s = np.zeros((n, n))
    s[tt, tn] = a
    s[tn, tt] = -b
    s[tn, nn] = c
    s[nn, tn] = c
    return OperatorMatrix(s, g.frame(), g.omega)


def subprincipal_zeroth(g):
    """Zeroth-order part of ``i·S_sub`` at ``Γ``, equal to ``-2 r⁻² s``."""
    s = s_matrix(g)
    return OperatorMatrix(-2.0 / g.r**2 * s.matrix, s.frame, s.omega)


def fiber_form_g(g):
    """Indefinite fiber form ``(-r⁻² I) ⊕ (-1) ⊕ 1`` in the ordered frame."""
    n = g.n
    return np.diag(np.concatenate([np.full(n - 2, -1.0 / g.r**2), [-1.0, 1.0]]))


def check_g_symmetry(g):
    """Hermiticity defect of ``G·Z`` with ``Z`` the zeroth-order part of ``S_sub``.

    ``Z = -i·subprincipal_zeroth(g)``.  Returns
    ``||G Z - (G Z)^†||₂ / ||G Z||₂`` (0 when ``Z = 0``).
    """
    z = -1j * subprincipal_zeroth(g).matrix
    gz = fiber_form_g(g) @ z
    scale = np.linalg.norm(gz, 2)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(gz - gz.conj().T, 2) / scale)


@dataclass(frozen=True)
class Conjugator:
    """``q = D·L`` with ``D`` diagonal and ``L`` unit lower triangular."""

    q: np.ndarray
    q_inv: np.ndarray
    diag: np.ndarray
    lower: np.ndarray
    lower_inv: np.ndarray
    inverse_defect: float
    frame: np.ndarray

    def conjugate(self, a):
        """``q a q⁻¹``, evaluated as ``D (L a L⁻¹) D⁻¹``.

        ``L`` does not depend on ``ε``, so the cancellations happen among
        ``O(1)`` numbers before the ``ε``-dependent diagonal rescaling.
        """
        inner = self.lower @ np.asarray(a) @ self.lower_inv
        return inner * np.outer(self.diag, 1.0 / self.diag)


def conjugator_q(g, eps):
    """Change-of-basis matrix taking ``s`` to ``O(ε)`` strictly upper triangular form.

    ``q = [[I, 0, 0], [0, ε⁻¹Ψr², 0], [-ε⁻²|η|⁻¹Ψ²r² i_η, 0, ε⁻²|η|⁻¹Ψr³σ]]``.
    """
    if not eps > 0:
        raise InputError("eps must be positive")
    size = g.eta_norm
    if size == 0.0:
        raise InputError("eta = 0: the conjugator is singular")
    if g.sigma == 0.0:
        raise InputError("sigma = 0: the conjugator is singular")
    n = g.n
    tt, tn, nn = _indices(n)
    psi, r, sig = g.psi, g.r, g.sigma
    d_tn = psi * r * r / eps
    d_nn = psi * r**3 * sig / (eps * eps * size)
    corner = -(psi * r) ** 2 / (eps * eps)  # -ε⁻²|η|⁻¹Ψ²r² · |η|
    diag = np.ones(n)
    diag[tn], diag[nn] = d_tn, d_nn
    q = np.diag(diag)
    q[nn, tt] = corner
    ell = corner / d_nn  # = -Ψ|η|/(rσ), independent of ε
    lower = np.eye(n)
    lower[nn, tt] = ell
    lower_inv = np.eye(n)
    lower_inv[nn, tt] = -ell
    q_inv = lower_inv * (1.0 / diag)[None, :]
    defect = float(np.max(np.abs(q_inv @ q - np.eye(n))))
    if defect > 1e-12:
        raise ArithmeticError(f"conjugator inverse check failed ({defect:.3g})")
    return Conjugator(q, q_inv, diag, lower, lower_inv, defect, g.frame())


def conjugated_s(g, eps):
    """``q s q⁻¹``; on ``Γ`` equals ``[[0, εη, 0], [0, 0, ε|η|], [0, 0, 0]]``."""
    conj = conjugator_q(g, eps)
    return OperatorMatrix(conj.conjugate(s_matrix(g).matrix), conj.frame, g.omega)


def expected_conjugated_s(g, eps):
    n = g.n
    tt, tn, nn = _indices(n)
    out = np.zeros((n, n))
    out[tt, tn] = eps * g.eta_norm
    out[tn, nn] = eps * g.eta_norm
    return out


def im_part(z, form=None):
    """``(1/2i)(Z - Z^{*B})`` with ``Z^{*B} = B⁻¹ Z^† B`` (``B = I`` by default)."""
    z = np.asarray(z, dtype=complex)
    adj = z.conj().T if form is None else np.linalg.solve(form, z.conj().T @ form)
    return (z - adj) / 2j


def conjugated_im_norm(g, eps):
    """``||Im^{B₀} Z_q||_{B₀} / |σ|`` for the conjugated zeroth-order part.

    ``Z_q = 2i r⁻² q s q⁻¹`` is the zeroth-order part of ``q S_sub q⁻¹``
    (``S_sub = -i`` times the ``i S_sub`` matrix).  ``B₀`` is the round
    metric on ``TT`` and ``1`` on ``TN``, ``N``; it is the identity in the
    orthonormal frame.  The transport part ``-i H_p`` is symmetric for ``B₀``
    and drops out.
    """
    if g.sigma == 0.0:
        raise InputError("sigma = 0")
    zq = 2j / g.r**2 * conjugated_s(g, eps).matrix
    return float(np.linalg.norm(im_part(zq), 2) / abs(g.sigma))


def im_norm_slope(p):
    """Closed form ``κ = √2 / (r_p α_p)`` of ``conjugated_im_norm = κ ε``."""
    rp, psi = sm.photon_sphere(p)
    return math.sqrt(2.0) / (rp * psi * rp)


@dataclass(frozen=True)
class GapCheck:
    """Comparison of the conjugated Im-norm against half an expansion rate."""

    label: str
    rate: float
    kappa: float
    eps_threshold: float
    eps0: float | None
    ratio_at_eps0: float | None

    @property
    def passed(self):
        return self.eps0 is not None and self.ratio_at_eps0 < self.rate / 2


def gap_check(g, rate, eps_values, label=""):
    """Largest ``ε`` in ``eps_values`` with ``conjugated_im_norm(ε) < rate/2``.

    ``eps_threshold`` is the bound ``rate/(2κ)`` below which every ``ε`` works,
    ``κ`` measured at the largest ``ε`` in the list.
    """
    eps_values = sorted((float(e) for e in eps_values), reverse=True)
    ratios = [conjugated_im_norm(g, e) for e in eps_values]
    kappa = ratios[0] / eps_values[0]
    eps0 = ratio0 = None
    for e, v in zip(eps_values, ratios):
        if v < rate / 2:
            eps0, ratio0 = e, v
            break
    return GapCheck(label, float(rate), kappa, rate / (2 * kappa), eps0, ratio0)


@dataclass
class GrowthLog:
    """Norm history of a transport propagator with polynomial and exponential fits.

    ``loglog_slope`` fits ``log||U||`` against ``log t`` and
    ``exp_rate`` fits ``log||U|| ≈ a + b t + c log(1+t)``, reporting ``b``;
    both fits use the second half of the window.
    """

    times: np.ndarray
    log_norms: np.ndarray
    loglog_slope: float
    exp_rate: float
    generator_rate: float

    @property
    def kind(self):
        return "polynomial" if self.loglog_slope <= 2.1 else "exponential"


def transport_generator(g):
    """Constant generator ``2 r⁻² s`` of transport in a parallel frame along ``Γ``.

    ``η`` is parallel along its own geodesic, so the ``η``-adapted frame is
    parallel and the zeroth-order part has constant coefficients in it.
    """
    return 2.0 / g.r**2 * s_matrix(g).matrix


def transport_propagator(g, t, perturbation=None):
    """``U(t) = exp(t (A + L0))`` with ``A = transport_generator(g)``; ``U(0) = I``."""
    if not t >= 0:
        raise InputError("t must be non-negative")
    gen = transport_generator(g)
    if perturbation is not None:
        perturbation = np.asarray(perturbation)
        if perturbation.shape != gen.shape:
            raise InputError(f"perturbation must be {gen.shape}")
        gen = gen + perturbation
    return scipy.linalg.expm(t * gen)


def transport_growth(g, T, perturbation=None, samples=201):
    """Propagator ``U(t) = exp(t (A + L0))`` of ``dU/dt = (A + L0) U`` on ``[0, T]``.

    ``A = transport_generator(g)``.  Without a perturbation ``U`` is a quadratic
    polynomial in ``t`` since ``A³ = 0``.
    """
    if not T > 0:
        raise InputError("T must be positive")
    gen = transport_generator(g)
    if perturbation is not None:
        perturbation = np.asarray(perturbation)
        if perturbation.shape != gen.shape:
            raise InputError(f"perturbation must be {gen.shape}")
        gen = gen + perturbation
    times = np.linspace(0.0, T, samples)
    log_norms = np.array([math.log(np.linalg.norm(scipy.linalg.expm(t * gen), 2)) for t in times])
    half = times >= T / 2
    tt, yy = times[half], log_norms[half]
    loglog = float(np.polyfit(np.log(tt), yy, 1)[0])
    design = np.column_stack([np.ones_like(tt), tt, np.log1p(tt)])
    coef = np.linalg.lstsq(design, yy, rcond=None)[0]
    return GrowthLog(
        times,
        log_norms,
        loglog,
        float(coef[1]),
        float(np.max(np.linalg.eigvals(gen).real)),
    )


def spectator_perturbation(g, size=0.1):
    """``size`` times the projector on the second TT frame vector.

    That direction is untouched by ``s``, so the perturbation is not nilpotent
    and its symmetrized spectral radius is ``size``.
    """
    if g.n < 4:
        raise InputError("need a spectator TT direction (n >= 4)")
    out = np.zeros((g.n, g.n))
    out[1, 1] = size
    return out


def characteristic_coefficients(mat):
    """Faddeev–LeVerrier coefficients ``c_1..c_N`` of ``det(λ - A) = λ^N + c_1 λ^(N-1) + …``.

    Works on any matrix type supporting ``@``, ``+`` and traces, including
    mpmath matrices.
    """
    import mpmath

    size = mat.rows
    eye = mpmath.eye(size)
    m = mpmath.zeros(size, size)
    coeffs = []
    c = mpmath.mpf(1)
    for k in range(1, size + 1):
        m = mat * m + c * eye
        am = mat * m
        c = -sum(am[i, i] for i in range(size)) / k
        coeffs.append(c)
    return coeffs


def s_spectral_bound(g, dps=50):
    """Certified upper bound on ``max |eigenvalue|`` of ``s`` at the exact ``Γ`` point.

    ``s`` is defective, so a double-precision eigensolver only resolves its
    eigenvalues to ``~sqrt(roundoff)``.  Instead ``r_p``, ``Ψ_p`` and
    ``σ = ±Ψ_p|η|`` are recomputed in ``dps`` digits, the characteristic
    polynomial of the ``(η̂, TN, N)`` block is formed exactly in that precision
    (the other TT directions are zero rows and columns, contributing
    eigenvalue 0), and Fujiwara's bound ``|λ| <= 2 max_k |c_k|^(1/k)`` encloses
    every root.
    """
    import mpmath

    if not g.strict:
        raise InputError("spectral bound is defined at trapped-set points only")
    p = g.params
    n = p.n
    with mpmath.workdps(dps):
        lam = 2 * mpmath.mpf(p.Lambda) / ((n - 2) * (n - 1))
        rp = ((n - 1) * mpmath.mpf(p.mass)) ** (mpmath.mpf(1) / (n - 3))
        mu = 1 - 2 * mpmath.mpf(p.mass) / rp ** (n - 3) - lam * rp**2
        psi = mpmath.sqrt(mu) / rp
        size = mpmath.sqrt(mpmath.fsum(mpmath.mpf(float(e)) ** 2 for e in g.eta))
        sigma = mpmath.sign(g.sigma) * psi * size
        block = mpmath.matrix(
            [[0, psi * rp**2 * size, 0], [-psi * size, 0, rp * sigma], [0, rp * sigma, 0]]
        )
        coeffs = characteristic_coefficients(block)
        bound = 2 * max(abs(c) ** (mpmath.mpf(1) / k) for k, c in enumerate(coeffs, start=1))
        return float(bound)
