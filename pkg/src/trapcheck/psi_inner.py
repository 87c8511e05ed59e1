"""Fiber-level calculus for phase-space dependent inner products.

At a single point of phase space a pseudodifferential inner product is just
a Hermitian matrix ``b``.  This module provides adjoints and imaginary parts
relative to ``b``, the homotopy ODE that factors one positive form through
another, the Jordan-block rescaling model, and the tensor-power derivation
bound.  Functions accept plain arrays or :class:`HermitianForm`.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import InputError

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class HermitianForm:
    """Hermitian matrix ``b`` with an optional positivity requirement."""

    matrix: np.ndarray
    positive: bool = True
    _sqrt: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        b = np.array(self.matrix, dtype=complex)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise InputError("a Hermitian form must be a square matrix")
        if not np.all(np.isfinite(b)):
            raise InputError("non-finite Hermitian form")
        scale = max(np.max(np.abs(b)), 1.0)
        if np.max(np.abs(b - b.conj().T)) > HERMITIAN_TOL * scale:
            raise InputError("matrix is not Hermitian")
        b = 0.5 * (b + b.conj().T)
        if self.positive and not np.linalg.eigvalsh(b)[0] > 0:
            raise InputError("form flagged positive has a nonpositive eigenvalue")
        b.setflags(write=False)
        object.__setattr__(self, "matrix", b)

    @property
    def size(self):
        return self.matrix.shape[0]

    def sqrt_pair(self):
        """Positive square root ``c`` of ``b`` and its inverse."""
        if not self.positive:
            raise InputError("square root requires a positive form")
        if not self._sqrt:
            w, v = np.linalg.eigh(self.matrix)
            root = np.sqrt(w)
            self._sqrt.append(((v * root) @ v.conj().T, (v / root) @ v.conj().T))
        return self._sqrt[0]


def _as_matrix(b):
    return b.matrix if isinstance(b, HermitianForm) else np.asarray(b, dtype=complex)


def _as_form(b):
    return b if isinstance(b, HermitianForm) else HermitianForm(b)


def adjoint_wrt(P, b):
    """Adjoint ``b⁻¹ P^† b`` of ``P`` for the sesquilinear form ``<b u, v>``."""
    bm = _as_matrix(b)
    P = np.asarray(P, dtype=complex)
    if np.linalg.cond(bm) > 1e14:
        raise InputError("form is singular or numerically singular")
    return np.linalg.solve(bm, P.conj().T @ bm)


def im_wrt(P, b):
    """``Im^b P = (P - P^{*b}) / 2i``; self-adjoint with respect to ``b``."""
    P = np.asarray(P, dtype=complex)
    return (P - adjoint_wrt(P, b)) / 2j


def b_norm(R, b):
    """Operator norm of ``R`` in the geometry of the positive form ``b``: ``||c R c⁻¹||₂``."""
    c, c_inv = _as_form(b).sqrt_pair()
    return float(np.linalg.norm(c @ np.asarray(R) @ c_inv, 2))


def to_euclidean(R, b):
    """``c R c⁻¹`` with ``c = sqrt(b)``; b-self-adjoint maps become Hermitian."""
    c, c_inv = _as_form(b).sqrt_pair()
    return c @ np.asarray(R) @ c_inv


def ode_factorize(b, b0, steps=1000, t_end=1.0):
    """Integrate ``q' = ½ q b_t⁻¹ (b - b₀)``, ``q(0) = I``, ``b_t = (1-t) b₀ + t b``.

    Classical RK4 with ``steps`` equal steps on ``[0, t_end]``; the solution
    satisfies ``q_t^† b₀ q_t = b_t``.  Leading axes of ``b`` and ``b0`` are
    treated as a batch of independent problems.
    """
    b = _as_matrix(b)
    b0 = _as_matrix(b0)
    if b.shape != b0.shape or b.shape[-1] != b.shape[-2]:
        raise InputError("b and b0 must be square matrices of the same shape")
    if steps < 1 or not 0 <= t_end <= 1:
        raise InputError("need steps >= 1 and t_end in [0, 1]")
    for m in (b, b0):
        if np.min(np.linalg.eigvalsh(m)) <= 0:
            raise InputError("b and b0 must be positive definite")
    diff = b - b0

    def rhs(t, q):
        bt = b0 + t * diff
        try:
            return 0.5 * q @ np.linalg.solve(bt, diff)
        except np.linalg.LinAlgError as exc:  # cannot happen for positive endpoints
            raise ArithmeticError(f"b_t lost positivity at t={t}") from exc

    q = np.broadcast_to(np.eye(b.shape[-1], dtype=complex), b.shape).copy()
    h = t_end / steps
    for k in range(steps):
        t = k * h
        k1 = rhs(t, q)
        k2 = rhs(t + h / 2, q + h / 2 * k1)
        k3 = rhs(t + h / 2, q + h / 2 * k2)
        k4 = rhs(t + h, q + h * k3)
        q = q + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return q


def factorization_residual(q, b, b0, t=1.0):
    """``||q^† b₀ q - b_t||₂`` (batched over leading axes)."""
    b = np.asarray(b, dtype=complex)
    b0 = np.asarray(b0, dtype=complex)
    bt = (1 - t) * b0 + t * b
    res = np.swapaxes(q.conj(), -1, -2) @ b0 @ q - bt
    return np.linalg.norm(res, ord=2, axis=(-2, -1))


def jordan_example(N, eps):
    """Rescaled single Jordan block and its imaginary part.

    ``A`` has ones on the superdiagonal and zeros elsewhere.  In the frame
    ``e'_j = ε^j e_j`` it becomes ``ε A``; with the inner product making the
    new frame orthonormal, ``Im`` has ``ε/2i`` above and ``-ε/2i`` below the
    diagonal.  Returns ``(scaled generator, Im matrix, spectral norm of Im)``.
    """
    if N < 2 or not eps > 0:
        raise InputError("need N >= 2 and eps > 0")
    jordan = np.diag(np.ones(N - 1), 1)
    scale = eps ** np.arange(1, N + 1, dtype=float)
    scaled = jordan * scale[None, :] / scale[:, None]  # D⁻¹ A D
    im = (scaled - scaled.conj().T) / 2j
    return scaled, im, float(np.linalg.norm(im, 2))


@dataclass(frozen=True)
class DerivationBound:
    """Derivation extension ``R_k`` of ``R`` to the ``k``-th tensor power and its norm."""

    R: np.ndarray
    b: np.ndarray
    k: int
    norm_b: float
    base_norm: float

    @property
    def excess(self):
        """``||R_k||_{b_k} - k ||R||_b``; nonpositive when the sharp bound holds."""
        return self.norm_b - self.k * self.base_norm


MAX_TENSOR_DIM = 4096


def tensor_power(b, R, k):
    """``b_k = b^{⊗k}``, ``R_k = Σ_i I^{⊗(i-1)} ⊗ R ⊗ I^{⊗(k-i)}`` and ``||R_k||_{b_k}``."""
    form = _as_form(b)
    R = np.asarray(R, dtype=complex)
    n = form.size
    if R.shape != (n, n):
        raise InputError("R must match the size of b")
    if k < 1:
        raise InputError("k must be >= 1")
    if n**k > MAX_TENSOR_DIM:
        raise InputError(f"tensor power of size {n}^{k} exceeds {MAX_TENSOR_DIM}")
    bk = np.ones((1, 1), dtype=complex)
    for _ in range(k):
        bk = np.kron(bk, form.matrix)
    rk = np.zeros((n**k, n**k), dtype=complex)
    for i in range(k):
        rk += np.kron(np.kron(np.eye(n**i), R), np.eye(n ** (k - 1 - i)))
    # sqrt(b^{⊗k}) = sqrt(b)^{⊗k}
    c, c_inv = form.sqrt_pair()
    ck = np.ones((1, 1), dtype=complex)
    ck_inv = np.ones((1, 1), dtype=complex)
    for _ in range(k):
        ck, ck_inv = np.kron(ck, c), np.kron(ck_inv, c_inv)
    norm = float(np.linalg.norm(ck @ rk @ ck_inv, 2))
    return DerivationBound(rk, bk, k, norm, b_norm(R, form))


def im_symbol_along_flow(b_path, S0_path, dt):
    """``Im^b S0 + ½ b⁻¹ db/dt`` at each sample of a uniformly sampled flow line.

    ``db/dt`` (the Hamilton derivative of ``b``) is taken by second-order
    central differences, one-sided at the ends.
    """
    b_path = np.asarray(b_path, dtype=complex)
    S0_path = np.asarray(S0_path, dtype=complex)
    if b_path.ndim != 3 or b_path.shape != S0_path.shape:
        raise InputError("b_path and S0_path must be stacks of equal square matrices")
    if len(b_path) < 3:
        raise InputError("need at least 3 samples")
    if not dt > 0:
        raise InputError("dt must be positive")
    for bm in b_path:
        HermitianForm(bm)
    db = np.gradient(b_path, dt, axis=0, edge_order=2)
    out = np.empty_like(S0_path)
    for i, (bm, s0) in enumerate(zip(b_path, S0_path)):
        out[i] = im_wrt(s0, bm) + 0.5 * np.linalg.solve(bm, db[i])
    return out


def random_form(rng, N, delta=1e-3, rows_per_dim=4):
    """Random positive form ``c^† c + δ I`` with ``c`` complex Gaussian of shape ``(rows_per_dim·N, N)``.

    The entries of ``c`` have variance ``1/(rows_per_dim·N)``, so ``c^† c`` is
    near the identity and well conditioned.
    """
    m = rows_per_dim * N
    c = (rng.normal(size=(m, N)) + 1j * rng.normal(size=(m, N))) / math.sqrt(2 * m)
    return c.conj().T @ c + delta * np.eye(N)


def random_matrix(rng, N):
    return rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
