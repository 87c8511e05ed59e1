"""Measured normal expansion rate against the closed form, n = 4..7."""
from trapcheck import hamiltonian_flow as hf, report as rp, sds_metric as sm

for n in (4, 5, 6, 7):
    params = sm.SdsParams.from_lambda(n, 1.0, 0.3 * rp.critical_lambda(n, 1.0))
    res = hf.lyapunov_normal(params, T=50.0, dt=1e-3)
    print(
        f"n={n}: rate {res.rate:.10f}  closed form {res.eigenvalue:.10f}  "
        f"rel {res.relative_error:.1e}  tangential {res.tangential_rate:+.1e}"
    )
