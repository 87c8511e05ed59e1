"""Round-sphere helpers in the Euclidean embedding S^{m-1} ⊂ R^m.

Points are unit vectors ``omega``; covectors at ``omega`` are identified with
tangent vectors (vectors orthogonal to ``omega``) through the round metric.
"""

import numpy as np

from .errors import InputError


def as_unit(omega, tol=1e-12):
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 1 or omega.size < 2:
        raise InputError("omega must be a vector in R^m with m >= 2")
    norm = np.linalg.norm(omega)
    if not np.isfinite(norm) or abs(norm - 1.0) > tol:
        raise InputError(f"omega must be a unit vector (|omega| = {norm!r})")
    return omega


def project_tangent(omega, v):
    """Orthogonal projection of ``v`` onto the tangent space at ``omega``."""
    v = np.asarray(v, dtype=float)
    return v - np.dot(omega, v) * omega


def tangent_frame(omega, lead=None):
    """Orthonormal basis of the tangent space at ``omega``.

    Returns an ``(m, m-1)`` array whose columns are orthonormal and orthogonal
    to ``omega``. If ``lead`` is given (a nonzero tangent vector) the first
    column is ``lead / |lead|``.
    """
    omega = np.asarray(omega, dtype=float)
    m = omega.size
    cols = [omega]
    if lead is not None:
        lead = project_tangent(omega, lead)
        nrm = np.linalg.norm(lead)
        if nrm == 0.0:
            raise InputError("lead direction is parallel to omega")
        cols.append(lead / nrm)
    seed = np.column_stack(cols + [np.eye(m)])
    q, _ = np.linalg.qr(seed)
    # QR may flip signs; restore the prescribed leading directions.
    for j, c in enumerate(cols):
        if np.dot(q[:, j], c) < 0:
            q[:, j] = -q[:, j]
    return q[:, 1:m]


def default_chart_center(omega):
    """Coordinate axis closest to ``omega`` (signed), used as gnomonic chart center."""
    j = int(np.argmax(np.abs(omega)))
    c = np.zeros_like(omega)
    c[j] = np.sign(omega[j]) or 1.0
    return c


def gnomonic_coordinates(omega, center):
    """Gnomonic (central projection) coordinates of ``omega`` around ``center``.

    The chart is ``theta -> (center + E theta) / sqrt(1 + |theta|^2)`` with
    ``E = tangent_frame(center)``; it covers the open hemisphere ``omega·center > 0``.
    Returns ``(theta, E)``.
    """
    cos = float(np.dot(omega, center))
    if cos <= 0.0:
        raise InputError("omega lies outside the gnomonic chart around center")
    frame = tangent_frame(center)
    return frame.T @ omega / cos, frame


def gnomonic_point(theta, center, frame):
    w = center + frame @ theta
    return w / np.linalg.norm(w)


def gnomonic_metric(theta):
    """Round metric ``dω²`` in gnomonic coordinates."""
    theta = np.asarray(theta, dtype=float)
    s2 = 1.0 + theta @ theta
    return np.eye(theta.size) / s2 - np.outer(theta, theta) / s2**2


def gnomonic_christoffel(theta):
    """Christoffel symbols ``G[k, i, j]`` of the round metric in gnomonic coordinates.

    Great circles are straight lines in this chart, so the connection is
    projectively flat: ``G^k_ij = -(δ^k_i θ_j + δ^k_j θ_i) / (1 + |θ|²)``.
    """
    theta = np.asarray(theta, dtype=float)
    d = theta.size
    s2 = 1.0 + theta @ theta
    eye = np.eye(d)
    return -(np.einsum("ki,j->kij", eye, theta) + np.einsum("kj,i->kij", eye, theta)) / s2


def great_circle(omega0, eta0, t):
    """Exact ``|η|²``-Hamilton flow on T*S: ``ω' = 2η``, ``η' = -2|η|²ω``.

    Returns ``(omega(t), eta(t))``.
    """
    speed = np.linalg.norm(eta0)
    if speed == 0.0:
        return np.array(omega0, dtype=float), np.zeros_like(omega0, dtype=float)
    phase = 2.0 * speed * t
    ehat = eta0 / speed
    c, s = np.cos(phase), np.sin(phase)
    return c * omega0 + s * ehat, speed * (c * ehat - s * omega0)
