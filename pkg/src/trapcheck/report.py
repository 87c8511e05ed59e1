"""Run configuration, the full verification pipeline, and output writers.

A run evaluates every check on one parameter set (plus the fixed parameter
sweeps some checks need), writes ``report.json`` and two trajectory CSVs, and
marks each numbered check ``pass`` or ``fail``.  Reports contain no timestamps
or timings, so two runs with the same configuration are byte-identical.
"""

import csv
from dataclasses import asdict, dataclass, field
import io
import json
import logging
import math
from pathlib import Path

import numpy as np

from . import hamiltonian_flow as hf
from . import psi_inner as pi
from . import sds_metric as sm
from . import sphere
from . import subprincipal as sp
from .errors import ConfigError, InputError, TrapcheckError

log = logging.getLogger(__name__)

DEFAULTS = {
    "T": 50.0,
    "dt": 1e-3,
    "seeds": 16,
    "eps": [1e-1, 1e-2, 1e-3],
    "k": [1, 2],
    "out_dir": "trapcheck_out",
    "seed": 0,
}
REQUIRED = ("n", "mass", "Lambda")
QUICK_T = 10.0


@dataclass
class RunConfig:
    n: int
    mass: float
    Lambda: float
    T: float = DEFAULTS["T"]
    dt: float = DEFAULTS["dt"]
    seeds: int = DEFAULTS["seeds"]
    eps: list = field(default_factory=lambda: list(DEFAULTS["eps"]))
    k: list = field(default_factory=lambda: list(DEFAULTS["k"]))
    out_dir: str = DEFAULTS["out_dir"]
    seed: int = DEFAULTS["seed"]

    @property
    def params(self):
        return sm.SdsParams(self.n, self.mass, self.Lambda)

    def to_json(self):
        """Canonical form: sorted keys, two-space indent, trailing newline."""
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def config_from_dict(data, source="<config>"):
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    unknown = sorted(set(data) - set(REQUIRED) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"{source}: unknown keys {unknown}")
    missing = [key for key in REQUIRED if key not in data]
    if missing:
        raise ConfigError(f"{source}: missing required keys {missing}")
    merged = {**{k: v for k, v in DEFAULTS.items()}, **data}
    for key in ("n", "seeds", "seed"):
        v = merged[key]
        if not (isinstance(v, int) and not isinstance(v, bool)):
            raise ConfigError(f"{source}: {key} must be an integer")
    for key in ("mass", "Lambda", "T", "dt"):
        if not _is_number(merged[key]) or not math.isfinite(merged[key]):
            raise ConfigError(f"{source}: {key} must be a finite number")
    for key in ("eps", "k"):
        v = merged[key]
        if not isinstance(v, list) or not v:
            raise ConfigError(f"{source}: {key} must be a non-empty list")
    if not all(_is_number(e) and e > 0 for e in merged["eps"]):
        raise ConfigError(f"{source}: eps values must be positive numbers")
    if not all(isinstance(k, int) and not isinstance(k, bool) and 1 <= k <= 4 for k in merged["k"]):
        raise ConfigError(f"{source}: k values must be integers in 1..4")
    if not merged["dt"] > 0 or not merged["T"] > 0:
        raise ConfigError(f"{source}: T and dt must be positive")
    if merged["seeds"] < 1 or merged["seed"] < 0:
        raise ConfigError(f"{source}: seeds must be >= 1 and seed >= 0")
    if not isinstance(merged["out_dir"], str):
        raise ConfigError(f"{source}: out_dir must be a string")
    merged["mass"] = float(merged["mass"])
    merged["Lambda"] = float(merged["Lambda"])
    merged["T"] = float(merged["T"])
    merged["dt"] = float(merged["dt"])
    merged["eps"] = [float(e) for e in merged["eps"]]
    cfg = RunConfig(**merged)
    try:
        report = sm.validate_params(cfg.params)
    except InputError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if not report.valid:
        raise ConfigError(
            f"{source}: nondegeneracy violated, M²λ^(n-3) = {report.lhs:.6g} "
            f">= {report.rhs:.6g}; no static region between horizons"
        )
    return cfg


def parse_config(path):
    """Read and validate a JSON run configuration; errors carry line and column."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return config_from_dict(data, str(path))


# ---------------------------------------------------------------- output files


def dump_trajectory_csv(traj, dest):
    """Write ``t, r, xi, omega_i, eta_i, p_value`` rows with 17 significant digits.

    ``dest`` is a path or a text stream; files are UTF-8 with LF line endings.
    """
    if len(traj) == 0:
        raise InputError("empty trajectory")
    m = traj.omega.shape[1]
    header = (
        ["t", "r", "xi"]
        + [f"omega_{i}" for i in range(1, m + 1)]
        + [f"eta_{i}" for i in range(1, m + 1)]
        + ["p_value"]
    )
    data = np.column_stack(
        [traj.times, traj.r, traj.xi, traj.omega, traj.eta, traj.p_values]
    )

    def _write(stream):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        for row in data:
            writer.writerow([format(v, ".17g") for v in row])

    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            _write(fh)
    else:
        _write(dest)


def trajectory_csv_text(traj):
    buf = io.StringIO()
    dump_trajectory_csv(traj, buf)
    return buf.getvalue()


def default_directions(m):
    omega = np.zeros(m)
    omega[-1] = 1.0
    eta = np.zeros(m)
    eta[0] = 1.0
    return omega, eta


def gamma_start(p):
    omega, eta = default_directions(p.n - 1)
    return hf.trapped_point(p, omega, eta)


def perturbed_start(p, delta, z=1):
    """Characteristic point over ``r_p`` with ``ξ = delta``."""
    omega, eta = default_directions(p.n - 1)
    rp = p.r_photon
    d = sm.delta_r(p, rp)
    eta2 = rp**4 / d - d * delta * delta
    if eta2 < 0:
        raise InputError(f"|xi| = {abs(delta)} too large for a characteristic point at r_p")
    return hf.PhasePoint(rp, omega, delta, math.sqrt(eta2) * eta, z)


# ---------------------------------------------------------------- checks

ANCHORS = {
    1: "photon-sphere radius equals ((n-1)M)^(1/(n-3))",
    2: "two simple horizon roots bracket the photon sphere and merge at criticality",
    3: "eigenvalues of the linearized radial flow at the trapped set",
    4: "normal expansion at the numerical Lyapunov rate, no expansion within the trapped set",
    5: "(r - r_p)^2 is an escape function on the characteristic set",
    6: "zeroth-order subprincipal part at the trapped set is nilpotent",
    7: "epsilon-rescaled frame makes the nilpotent part strictly upper triangular",
    8: "conjugated imaginary part is O(epsilon) and beats half the expansion rate",
    9: "homotopy ODE factors one positive fiber form through another",
    10: "derivation extension to tensor powers has norm at most k times the base norm",
    11: "rescaled Jordan block has imaginary part of norm at most epsilon",
    12: "transport along the trapped set grows polynomially, perturbed transport exponentially",
}

TITLES = {
    1: "photon_sphere",
    2: "horizons",
    3: "linearization_eigenvalues",
    4: "normal_hyperbolicity",
    5: "escape_function",
    6: "nilpotency",
    7: "conjugation",
    8: "epsilon_symmetrizability",
    9: "factorization_ode",
    10: "tensor_power",
    11: "jordan_toy",
    12: "transport_dichotomy",
}


def _rng(seed, item):
    return np.random.default_rng([seed, item])


def check_photon_sphere(cfg):
    worst = 0.0
    for n in (4, 5, 6, 7):
        for mass in (0.5, 1.0, 2.0):
            p = sm.SdsParams.from_lambda(n, mass, 1e-4)
            rp, _ = sm.photon_sphere(p)
            closed = ((n - 1) * mass) ** (1.0 / (n - 3))
            worst = max(worst, abs(rp - closed) / closed, abs(sm.tilde_mu_prime(p, rp)))
    rp, psi = sm.photon_sphere(cfg.params)
    return worst <= 1e-12, {"max_rel_error": worst, "r_p": rp, "psi_p": psi}


def horizon_residual(p):
    rm, rpl = sm.horizons(p)
    return max(
        abs(sm.mu(p, r)) / max(1.0, abs(sm.mu_prime(p, r))) for r in (rm, rpl)
    )


def critical_lambda(n, mass):
    """``λ`` at which the nondegeneracy inequality becomes an equality."""
    return ((n - 3) ** (n - 3) / (n - 1) ** (n - 1) / mass**2) ** (1.0 / (n - 3))


def near_critical_gaps(n, mass, steps=12):
    lam_c = critical_lambda(n, mass)
    fracs = 1.0 - np.logspace(-1, -6, steps)
    gaps = []
    for f in fracs:
        rm, rpl = sm.horizons(sm.SdsParams.from_lambda(n, mass, f * lam_c))
        gaps.append(rpl - rm)
    return fracs, np.array(gaps)


def check_horizons(cfg):
    p = cfg.params
    res = horizon_residual(p)
    _, gaps = near_critical_gaps(p.n, p.mass)
    monotone = bool(np.all(np.diff(gaps) < 0))
    rm, rpl = sm.horizons(p)
    inside = np.linspace(rm, rpl, 102)[1:-1]
    positive = bool(np.all(sm.mu(p, inside) > 0))
    ok = res <= 1e-12 and monotone and positive and rm < p.r_photon < rpl
    return ok, {
        "mu_residual": res,
        "near_critical_gaps": gaps.tolist(),
        "gap_monotone": monotone,
        "mu_positive_inside": positive,
    }


def n4_eigenvalue(mass, lam):
    """Four-dimensional specialization ``r_p = 3M``: ``6M (3/(1 - 27 M² λ))^(1/2)``."""
    return 6.0 * mass * math.sqrt(3.0 / (1.0 - 27.0 * mass * mass * lam))


def check_linearization(cfg):
    p = cfg.params
    lin = hf.linearization(p)
    rel = abs(lin.positive_eigenvalue - lin.eigenvalue_closed_form) / lin.eigenvalue_closed_form
    rel_neg = abs(-lin.eigenvalues[0] - lin.eigenvalue_closed_form) / lin.eigenvalue_closed_form
    p4 = sm.SdsParams.from_lambda(4, p.mass, min(p.lambda_small, 0.5 * critical_lambda(4, p.mass)))
    lin4 = hf.linearization(p4)
    rel4 = abs(lin4.eigenvalue_closed_form - n4_eigenvalue(p4.mass, p4.lambda_small)) / lin4.eigenvalue_closed_form
    rel4_num = abs(lin4.positive_eigenvalue - n4_eigenvalue(p4.mass, p4.lambda_small)) / lin4.eigenvalue_closed_form
    err = max(rel, rel_neg, rel4, rel4_num)
    return err <= 1e-10, {
        "matrix": lin.matrix.tolist(),
        "eigenvalues": lin.eigenvalues.real.tolist(),
        "closed_form": lin.eigenvalue_closed_form,
        "max_rel_error": err,
        "n4_specialization_error": max(rel4, rel4_num),
    }


def check_lyapunov(cfg, T):
    res = hf.lyapunov_normal(cfg.params, T=T, dt=cfg.dt)
    ok = res.relative_error <= 1e-4 and abs(res.tangential_rate) <= 1e-6
    return ok, {
        "T": T,
        "numeric_rate": res.rate,
        "eigenvalue": res.eigenvalue,
        "nu_min_closed_form": res.nu_min,
        "rate_over_eigenvalue": res.rate / res.eigenvalue,
        "rate_over_nu_min": res.rate / res.nu_min,
        "relative_error": res.relative_error,
        "tangential_rate": res.tangential_rate,
    }, res


def check_escape(cfg):
    violations = hf.escape_scan(cfg.params, seed=cfg.seed)
    return not violations, {"grid_points": 10_000, "violations": len(violations)}


def check_nilpotency(cfg, points=100):
    rng = _rng(cfg.seed, 6)
    p = cfg.params
    cube = bound = 0.0
    s2_min = math.inf
    float_eig = 0.0
    for _ in range(points):
        g = sp.GammaPointData.random(p, rng)
        s = sp.s_matrix(g).matrix
        ns = np.linalg.norm(s, 2)
        cube = max(cube, np.max(np.abs(s @ s @ s)) / ns**3)
        s2_min = min(s2_min, np.max(np.abs(s @ s)) / ns**2)
        bound = max(bound, sp.s_spectral_bound(g))
        float_eig = max(float_eig, np.max(np.abs(np.linalg.eigvals(s))))
    ok = cube <= 1e-12 and bound <= 1e-10 and s2_min > 0
    return ok, {
        "points": points,
        "max_rel_cube": cube,
        "min_rel_square": s2_min,
        "eigenvalue_bound_extended": bound,
        "eigenvalue_max_double": float_eig,
    }


def check_conjugation(cfg, points=100):
    rng = _rng(cfg.seed, 7)
    p = cfg.params
    worst = 0.0
    defect = 0.0
    for _ in range(points):
        g = sp.GammaPointData.random(p, rng)
        for eps in (1e-1, 1e-2, 1e-3):
            got = sp.conjugated_s(g, eps).matrix
            worst = max(worst, np.max(np.abs(got - sp.expected_conjugated_s(g, eps))))
            defect = max(defect, sp.conjugator_q(g, eps).inverse_defect)
    return worst <= 1e-12, {"points": points, "max_abs_deviation": worst, "inverse_defect": defect}


def check_symmetrizability(cfg, lyap=None):
    p = cfg.params
    omega, eta = default_directions(p.n - 1)
    x = gamma_start(p)
    g = sp.GammaPointData.on_gamma(p, omega, x.eta)
    decades = sorted(set([1e-1, 1e-2, 1e-3] + list(cfg.eps)), reverse=True)
    kappas = [sp.conjugated_im_norm(g, e) / e for e in decades]
    spread = max(kappas) / min(kappas) - 1.0
    lin = hf.linearization(p)
    rates = {
        "eigenvalue": lin.positive_eigenvalue,
        "nu_min_closed_form": lin.nu_min_closed_form,
    }
    if lyap is not None:
        rates["lyapunov_numeric"] = lyap.rate
    sweep = [10.0 ** (-j) for j in range(0, 13)]
    gaps = {}
    for label, rate in rates.items():
        gc = sp.gap_check(g, rate, sweep, label)
        gaps[label] = {
            "rate": gc.rate,
            "half_rate": gc.rate / 2,
            "eps_threshold": gc.eps_threshold,
            "eps0": gc.eps0,
            "ratio_at_eps0": gc.ratio_at_eps0,
            "passed": gc.passed,
        }
    ok = spread <= 0.01 and all(gaps[k]["passed"] for k in ("eigenvalue", "nu_min_closed_form"))
    return ok, {
        "eps": decades,
        "kappa_values": kappas,
        "kappa_spread": spread,
        "kappa_closed_form": sp.im_norm_slope(p),
        "gap_checks": gaps,
    }


def check_factorization(cfg, pairs=100, N=5):
    rng = _rng(cfg.seed, 9)
    b = np.array([pi.random_form(rng, N) for _ in range(pairs)])
    b0 = np.array([pi.random_form(rng, N) for _ in range(pairs)])
    res = pi.factorization_residual(pi.ode_factorize(b, b0, 1000), b, b0)
    r40 = pi.factorization_residual(pi.ode_factorize(b, b0, 40), b, b0)
    r80 = pi.factorization_residual(pi.ode_factorize(b, b0, 80), b, b0)
    ratios = r40 / r80
    ok = float(res.max()) <= 1e-8 and bool(np.all((ratios >= 14) & (ratios <= 18)))
    return ok, {
        "pairs": pairs,
        "max_residual_1000": float(res.max()),
        "richardson_min": float(ratios.min()),
        "richardson_max": float(ratios.max()),
    }


def check_tensor(cfg, instances=500):
    rng = _rng(cfg.seed, 10)
    worst = -math.inf
    per_k = {}
    for _ in range(instances):
        N = int(rng.integers(1, 5))
        k = int(rng.integers(1, 5))
        b = pi.random_form(rng, N)
        R = pi.random_matrix(rng, N)
        d = pi.tensor_power(b, R, k)
        worst = max(worst, d.excess)
        per_k[k] = max(per_k.get(k, -math.inf), d.excess)
    requested = {str(k): per_k.get(k) for k in cfg.k}
    return worst <= 1e-10, {
        "instances": instances,
        "max_excess": worst,
        "max_excess_requested_k": requested,
    }


def check_jordan(cfg):
    worst_norm = -math.inf
    worst_eig = 0.0
    for N in range(2, 21):
        for eps in (1.0, 0.1, 0.01):
            _, im, norm = pi.jordan_example(N, eps)
            worst_norm = max(worst_norm, norm - eps)
            ev = np.sort(np.linalg.eigvalsh(im))
            ref = np.sort(eps * np.cos(np.arange(1, N + 1) * np.pi / (N + 1)))
            worst_eig = max(worst_eig, np.max(np.abs(ev - ref)))
    return worst_norm <= 0 and worst_eig <= 1e-10, {
        "max_norm_minus_eps": worst_norm,
        "max_eigenvalue_error": worst_eig,
    }


def check_transport(cfg):
    p = cfg.params
    omega, _ = default_directions(p.n - 1)
    g = sp.GammaPointData.on_gamma(p, omega, gamma_start(p).eta)
    free = sp.transport_growth(g, 100.0)
    pert = sp.transport_growth(g, 100.0, sp.spectator_perturbation(g, 0.1))
    ok = free.loglog_slope <= 2.1 and pert.exp_rate >= 0.05
    return ok, {
        "T": 100.0,
        "unperturbed_loglog_slope": free.loglog_slope,
        "unperturbed_exp_rate": free.exp_rate,
        "perturbed_exp_rate": pert.exp_rate,
        "perturbed_generator_rate": pert.generator_rate,
    }


def dynamics_block(cfg, T, rng):
    """Conservation along the trapped orbit and escape of off-``Γ`` seeds."""
    p = cfg.params
    gamma = hf.integrate(p, gamma_start(p), T, cfg.dt)
    perturbed = hf.integrate(p, perturbed_start(p, 1e-3), T, cfg.dt)
    seeds = []
    for _ in range(cfg.seeds):
        seeds.append(escape_seed(p, rng, cfg.dt))
    return {
        "gamma_p_drift": gamma.p_drift,
        "gamma_eta_drift": gamma.eta_drift,
        "gamma_max_r_offset": float(np.max(np.abs(gamma.r - p.r_photon))),
        "gamma_max_abs_xi": float(np.max(np.abs(gamma.xi))),
        "perturbed_exited": perturbed.exited,
        "perturbed_exit_side": perturbed.exit_side,
        "perturbed_exit_time": perturbed.exit_time,
        "seed_count": len(seeds),
        "seeds_all_exited": all(s["exited"] for s in seeds),
        "seed_max_exit_time": max(s["exit_time"] for s in seeds) if all(s["exited"] for s in seeds) else None,
        "seed_max_p_drift": max(s["p_drift"] for s in seeds),
    }, gamma, perturbed


def escape_seed(p, rng, dt, T=200.0):
    """Random characteristic point with ``|ξ| >= 1e-2`` or ``|r - r_p| >= 1e-2``; integrate until exit."""
    lo, hi = hf.exit_window(p)
    rp = p.r_photon
    m = p.n - 1
    while True:
        r = rng.uniform(lo, hi)
        d = sm.delta_r(p, r)
        xi = rng.uniform(-1.0, 1.0) * r * r / d
        if abs(xi) >= 1e-2 or abs(r - rp) >= 1e-2:
            break
    eta2 = max(r**4 / d - d * xi * xi, 0.0)
    om = rng.normal(size=m)
    om /= np.linalg.norm(om)
    et = sphere.project_tangent(om, rng.normal(size=m))
    et *= math.sqrt(eta2) / np.linalg.norm(et)
    traj = hf.integrate(p, hf.PhasePoint(r, om, xi, et, 1), T, dt)
    return {"exited": traj.exited, "exit_time": traj.exit_time, "p_drift": traj.p_drift}


def geometry_block(p):
    report = sm.validate_params(p)
    rm, rpl = sm.horizons(p)
    rp, psi = sm.photon_sphere(p)
    bm, bp = sm.beta_pm(p)
    lin = hf.linearization(p)
    return {
        "n": p.n,
        "mass": p.mass,
        "Lambda": p.Lambda,
        "lambda_small": p.lambda_small,
        "nondegeneracy_margin": report.margin,
        "r_minus": rm,
        "r_plus": rpl,
        "r_p": rp,
        "psi_p": psi,
        "alpha_p": psi * rp,
        "beta_minus": bm,
        "beta_plus": bp,
        "nu_candidates": {
            "linearization_eigenvalue": lin.eigenvalue_closed_form,
            "nu_min_closed_form": lin.nu_min_closed_form,
        },
    }


@dataclass
class RunReport:
    data: dict
    failed: list

    @property
    def passed(self):
        return not self.failed

    def to_json(self):
        return json.dumps(self.data, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _finite(obj):
    if isinstance(obj, float):
        return math.isfinite(obj)
    if isinstance(obj, dict):
        return all(_finite(v) for v in obj.values())
    if isinstance(obj, (list, tuple)):
        return all(_finite(v) for v in obj)
    return True


def _plain(obj):
    """Convert numpy scalars so ``json`` output is stable."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def run_full_report(cfg, out_dir=None, quick=False):
    """Evaluate every check, write ``report.json`` plus CSVs, and return the report.

    ``quick`` shortens the trajectory horizon to ``min(T, 10)``.  Errors inside
    a check are caught and recorded as a failing verdict with the message.
    """
    T = min(cfg.T, QUICK_T) if quick else cfg.T
    p = cfg.params
    items = {}
    extra = {}

    def run(idx, fn, *args):
        try:
            out = fn(*args)
            ok, detail = out[0], out[1]
            if len(out) > 2:
                extra[idx] = out[2]
        except TrapcheckError as exc:
            ok, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
        except (ArithmeticError, np.linalg.LinAlgError) as exc:
            ok, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
        items[idx] = {"name": TITLES[idx], "verdict": "pass" if ok else "fail", "detail": _plain(detail)}
        log.info("check %d %s: %s", idx, TITLES[idx], items[idx]["verdict"])

    run(1, check_photon_sphere, cfg)
    run(2, check_horizons, cfg)
    run(3, check_linearization, cfg)
    run(4, check_lyapunov, cfg, T)
    run(5, check_escape, cfg)
    run(6, check_nilpotency, cfg)
    run(7, check_conjugation, cfg)
    run(8, check_symmetrizability, cfg, extra.get(4))
    run(9, check_factorization, cfg)
    run(10, check_tensor, cfg)
    run(11, check_jordan, cfg)
    run(12, check_transport, cfg)

    dyn, gamma, perturbed = dynamics_block(cfg, T, _rng(cfg.seed, 100))
    data = {
        "config": asdict(cfg),
        "quick": quick,
        "geometry": geometry_block(p),
        "dynamics": {
            **dyn,
            "lyapunov": items[4]["detail"],
            "escape_scan": items[5]["detail"],
        },
        "subprincipal": {
            "nilpotency": items[6]["detail"],
            "conjugation": items[7]["detail"],
            "symmetrizability": items[8]["detail"],
            "transport": items[12]["detail"],
            "conjugated_display_factor": "r^-2 (recomputed from s)",
        },
        "psi_inner": {
            "factorization": items[9]["detail"],
            "tensor_power": items[10]["detail"],
            "jordan": items[11]["detail"],
        },
        "verdicts": [
            {"item": i, "name": items[i]["name"], "verdict": items[i]["verdict"]} for i in sorted(items)
        ],
        "anchors": [{"item": i, "name": TITLES[i], "statement": ANCHORS[i]} for i in sorted(items)],
    }
    data = _plain(data)
    if not _finite(data):
        raise ArithmeticError("report contains non-finite numbers")
    failed = [i for i in sorted(items) if items[i]["verdict"] == "fail"]
    report = RunReport(data, failed)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json(), encoding="utf-8", newline="\n")
        dump_trajectory_csv(gamma, out / "trajectory_gamma.csv")
        dump_trajectory_csv(perturbed, out / "trajectory_perturbed.csv")
    return report
