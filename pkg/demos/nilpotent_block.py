"""The nilpotent block on the trapped set and its ε-rescaling.

Shows that s³ = 0, that conjugation makes it O(ε) strictly upper triangular,
and that the Im-norm of the conjugated part is linear in ε.
"""
import numpy as np

from trapcheck import hamiltonian_flow as hf, sds_metric as sm, subprincipal as sp

np.set_printoptions(precision=4, suppress=True, linewidth=120)

params = sm.SdsParams(4, 1.0, 0.03)
eta = hf.trapped_point(params, [0, 0, 1.0], [1.0, 0, 0]).eta
g = sp.GammaPointData.on_gamma(params, [0, 0, 1.0], eta)
s = sp.s_matrix(g).matrix
print("s =\n", s)
print("|s^3| =", np.linalg.norm(s @ s @ s, 2), " certified |eig| <=", sp.s_spectral_bound(g))

kappa = sp.im_norm_slope(params)
for eps in (1e-1, 1e-2, 1e-3):
    print(f"eps={eps:g}:")
    print(sp.conjugated_s(g, eps).matrix)
    print(f"  Im-norm / eps = {sp.conjugated_im_norm(g, eps) / eps:.12f}  (closed form {kappa:.12f})")
