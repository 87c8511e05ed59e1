"""Factorization ODE, the Jordan toy model and the tensor-power bound."""
import math

import numpy as np
import scipy.linalg

from trapcheck import psi_inner as pi

rng = np.random.default_rng(1)
b, b0 = pi.random_form(rng, 4), pi.random_form(rng, 4)
exact = scipy.linalg.sqrtm(np.linalg.solve(b0, b))
for steps in (10, 20, 40, 80):
    q = pi.ode_factorize(b, b0, steps)
    print(f"steps={steps:3d}: error {np.linalg.norm(q - exact, 2):.3e}  residual {pi.factorization_residual(q, b, b0):.3e}")

for N in (2, 5, 10, 20):
    _, _, norm = pi.jordan_example(N, 0.1)
    print(f"N={N:2d}: |Im| = {norm:.6f}  0.1 cos(pi/(N+1)) = {0.1 * math.cos(math.pi / (N + 1)):.6f}")

worst = max(pi.tensor_power(pi.random_form(rng, 3), pi.random_matrix(rng, 3), k).excess for k in (1, 2, 3) for _ in range(20))
print(f"tensor power: largest excess over k·||Im R|| = {worst:.2e}")
