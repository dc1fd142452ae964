"""Executable forms of the governing estimates.

Per-path energy ledgers (discrete Ito accounting of the squared H-norm),
ensemble balance and moment-bound checks with confidence intervals,
operator property suites over random corpora, twin-run contraction tests
with the regime-specific exponential weight, and spectral self-convergence
studies.
"""

import concurrent.futures as _futures
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _stats

from .basis import SpectralField, build_basis, inner_h, lp_norm
from .config import replace, uniqueness_regime, RegimeError
from .integrator import (coarsen_record, make_record, simulate_pair_crn,
                         simulate_path)
from .noise import restrict_record
from .operators import apply_absorption, apply_convection, apply_stokes
from .presets import random_field
from .rng import stream

PERTURB = 3  # rng channel for twin-run initial separations


# -- reports ------------------------------------------------------------------


@dataclass
class PropertyReport:
    """Outcome of one property scan over a random corpus."""

    name: str
    samples: int
    worst: float
    tol: float
    passed: bool
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        out = {"name": self.name, "samples": self.samples, "worst": self.worst,
               "tol": self.tol, "passed": bool(self.passed), "seed": self.seed}
        out.update(self.extra)
        return out

    def line(self):
        state = "pass" if self.passed else "FAIL"
        return f"{state}  {self.name}: worst={self.worst:.3e} tol={self.tol:.1e} (m={self.samples})"


@dataclass
class EnergyLedger:
    """Per-output-time accounting of every term in the energy identity."""

    times: np.ndarray
    energy_h2: np.ndarray
    diss_v: np.ndarray
    diss_lr1: np.ndarray
    mart_wiener: np.ndarray
    mart_jump: np.ndarray
    qv_sigma: np.ndarray
    qv_gamma: np.ndarray
    residual: np.ndarray
    jump_events: list = field(default_factory=list)  # (t, ledger delta, state delta)

    COLUMNS = ("time", "energy_H2", "diss_V", "diss_Lr1", "mart_wiener",
               "mart_jump", "qv_sigma", "qv_gamma", "residual")

    def rows(self):
        return np.column_stack([self.times, self.energy_h2, self.diss_v,
                                self.diss_lr1, self.mart_wiener, self.mart_jump,
                                self.qv_sigma, self.qv_gamma, self.residual])


class _LedgerObserver:
    """Accumulates the discrete energy identity along one trajectory."""

    def __init__(self, mu, beta):
        self.mu = mu
        self.beta = beta
        self.diss_v = 0.0
        self.diss_l = 0.0
        self.mart_w = 0.0
        self.mart_j = 0.0
        self.qv_sig = 0.0
        self.qv_gam = 0.0
        self.nodes = []        # (t, ||u||^2, running copies of all accumulators)
        self.jump_events = []

    def on_flow(self, t, h, u, lr1, sig_inc, sig_lq2, comp):
        self.diss_v += 2.0 * self.mu * h * u.norm_v() ** 2
        self.diss_l += 2.0 * self.beta * h * lr1
        if sig_inc is not None:
            self.mart_w += 2.0 * inner_h(sig_inc, u)
            self.qv_sig += h * sig_lq2
        if comp is not None:
            self.mart_j -= 2.0 * h * inner_h(comp, u)

    def on_jump(self, tau, u_minus, inc):
        delta = 2.0 * inner_h(inc, u_minus) + inc.norm_h() ** 2
        post = SpectralField(u_minus.basis, u_minus.coeffs + inc.coeffs)
        self.jump_events.append((tau, delta, post.norm_h() ** 2 - u_minus.norm_h() ** 2))
        self.mart_j += 2.0 * inner_h(inc, u_minus)
        self.qv_gam += inc.norm_h() ** 2

    def on_node(self, t, u):
        self.nodes.append((t, u.norm_h() ** 2, self.diss_v, self.diss_l,
                           self.mart_w, self.mart_j, self.qv_sig, self.qv_gam))


def energy_ledger(tr, cfg):
    """Replay a trajectory and evaluate every term of the energy identity.

    The residual is ||u(t)||^2 - ||u0||^2 + dissipation - martingale and
    quadratic-variation terms, evaluated with the scheme's own realized
    increments at each requested output time.
    """
    if tr.record is None:
        raise ValueError("trajectory carries no NoiseRecord")
    basis = build_basis(cfg.d, cfg.n)
    obs = _LedgerObserver(cfg.mu, cfg.beta)
    replay = simulate_path(cfg, basis=basis, record=tr.record, observer=obs,
                           path_index=tr.record.path_index)
    u0 = cfg.initial(basis)
    e0 = u0.norm_h() ** 2
    node_rows = np.array([(0.0, e0, 0, 0, 0, 0, 0, 0)] + obs.nodes)
    times = np.asarray(tr.times, dtype=float)
    idx = np.searchsorted(node_rows[:, 0], times + 1e-12 * max(cfg.T, 1.0)) - 1
    idx = np.clip(idx, 0, node_rows.shape[0] - 1)
    picked = node_rows[idx]
    energy = picked[:, 1]
    residual = (energy - e0 + picked[:, 2] + picked[:, 3]
                - picked[:, 4] - picked[:, 5] - picked[:, 6] - picked[:, 7])
    del replay
    return EnergyLedger(times=times, energy_h2=energy, diss_v=picked[:, 2],
                        diss_lr1=picked[:, 3], mart_wiener=picked[:, 4],
                        mart_jump=picked[:, 5], qv_sigma=picked[:, 6],
                        qv_gamma=picked[:, 7], residual=residual,
                        jump_events=obs.jump_events)


# -- ensemble statistics ------------------------------------------------------


class _BalanceObserver:
    """Per-path reductions needed by the balance and moment checks."""

    def __init__(self, mu, beta, gamma):
        self.mu = mu
        self.beta = beta
        self.gamma = gamma
        self.int_v = 0.0
        self.int_l = 0.0
        self.int_sig = 0.0
        self.int_gam_rate = 0.0
        self.sup_h2 = 0.0

    def on_flow(self, t, h, u, lr1, sig_inc, sig_lq2, comp):
        h2 = u.norm_h() ** 2
        self.sup_h2 = max(self.sup_h2, h2)
        self.int_v += h * u.norm_v() ** 2
        self.int_l += h * lr1
        self.int_sig += h * sig_lq2
        if self.gamma is not None:
            self.int_gam_rate += h * self.gamma.second_moment_rate(np.sqrt(h2))

    def on_jump(self, tau, u_minus, inc):
        pass

    def on_node(self, t, u):
        self.sup_h2 = max(self.sup_h2, u.norm_h() ** 2)


def _path_stats(cfg, path_indices):
    """Balance statistic components for a chunk of trajectory indices."""
    basis = build_basis(cfg.d, cfg.n)
    gamma = cfg.gamma_family(basis)
    rows = []
    tripped = 0
    for p in path_indices:
        obs = _BalanceObserver(cfg.mu, cfg.beta, gamma)
        tr = simulate_path(cfg, basis=basis, path_index=int(p), observer=obs)
        if tr.status != "completed":
            tripped += 1
            continue
        e_T = tr.states[-1].norm_h() ** 2
        e_0 = cfg.initial(basis).norm_h() ** 2
        rows.append((e_T, e_0, obs.int_v, obs.int_l, obs.int_sig,
                     obs.int_gam_rate, obs.sup_h2))
    return np.array(rows, dtype=float).reshape(len(rows), 7), tripped


def _run_chunks(cfg, m, jobs):
    idx = np.arange(m)
    if jobs <= 1:
        return _path_stats(cfg, idx)
    chunks = np.array_split(idx, jobs * 4)
    rows, tripped = [], 0
    with _futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        for part, t in pool.map(_path_stats, [cfg] * len(chunks), chunks):
            rows.append(part)
            tripped += t
    return np.concatenate(rows, axis=0), tripped


@dataclass
class BalanceReport:
    """Ensemble test of the expected energy balance equality."""

    m: int
    excluded: int
    mean: float
    se: float
    bias_band: float
    sigmas: float
    passed: bool
    values: np.ndarray = field(default=None, repr=False)  # per-path statistics

    def as_dict(self):
        return {"name": "ensemble-energy-balance", "m": self.m,
                "excluded": self.excluded, "mean": self.mean, "se": self.se,
                "bias_band": self.bias_band, "sigmas": self.sigmas,
                "passed": bool(self.passed)}

    def line(self):
        state = "pass" if self.passed else "FAIL"
        return (f"{state}  energy balance: mean={self.mean:.3e} "
                f"band={self.sigmas:.0f}*{self.se:.3e}+{self.bias_band:.3e} (m={self.m})")


def _balance_stat(rows, cfg):
    """S = e_T + 2 mu int_V + 2 beta int_L - e_0 - int ||sigma||^2 - int rate."""
    e_T, e_0, iv, il, isig, igam = (rows[:, i] for i in range(6))
    return e_T + 2 * cfg.mu * iv + 2 * cfg.beta * il - e_0 - isig - igam


def ensemble_energy_balance(cfg, m, jobs=1, pilot=128):
    """Mean balance statistic with CI and a CRN-estimated O(dt) bias band.

    The bias of the discrete scheme is estimated by re-running a pilot
    ensemble on the same noise records coarsened/refined by factor two and
    Richardson-extrapolating the difference of means.
    """
    if m < 2:
        raise ValueError("ensemble size must be >= 2")
    rows, tripped = _run_chunks(cfg, m, jobs)
    S = _balance_stat(rows, cfg)
    mean = float(np.mean(S))
    se = float(np.std(S, ddof=1) / np.sqrt(S.size))
    bias = _bias_estimate(cfg, pilot)
    band = 2.0 * abs(bias[0]) + cfg.stat_sigmas * bias[1]
    passed = abs(mean) <= cfg.stat_sigmas * se + band
    return BalanceReport(m=int(S.size), excluded=tripped, mean=mean, se=se,
                         bias_band=band, sigmas=cfg.stat_sigmas, passed=passed,
                         values=S)


def _bias_estimate(cfg, pilot):
    """CRN estimate of E[S(dt) - S(dt/2)] (first-order bias is twice this)."""
    basis = build_basis(cfg.d, cfg.n)
    gamma = cfg.gamma_family(basis)
    fine_cfg = replace(cfg, dt=cfg.dt / 2)
    diffs = []
    for p in range(pilot):
        rec_fine = make_record(fine_cfg, basis, path_index=p)
        rec = coarsen_record(rec_fine, 2)
        vals = []
        for c, r in ((cfg, rec), (fine_cfg, rec_fine)):
            obs = _BalanceObserver(c.mu, c.beta, gamma)
            tr = simulate_path(c, basis=basis, record=r, path_index=p, observer=obs)
            if tr.status != "completed":
                vals = None
                break
            e_T = tr.states[-1].norm_h() ** 2
            e_0 = c.initial(basis).norm_h() ** 2
            row = np.array([[e_T, e_0, obs.int_v, obs.int_l, obs.int_sig,
                             obs.int_gam_rate]])
            vals.append(_balance_stat(row, c)[0])
        if vals is not None:
            diffs.append(vals[0] - vals[1])
    diffs = np.array(diffs)
    return float(np.mean(diffs)), float(np.std(diffs, ddof=1) / np.sqrt(diffs.size))


@dataclass
class MomentReport:
    """Monte Carlo moment estimate against the explicit a-priori bound."""

    m: int
    excluded: int
    sup_h2: float
    sup_h2_ci: float
    diss_v: float
    diss_l: float
    estimate: float
    estimate_ci: float
    k1: float
    bound: float
    bound_constant: float
    p2_moment: float
    p2_ci: float
    passed: bool

    def as_dict(self):
        return {"name": "moment-bound", "m": self.m, "excluded": self.excluded,
                "sup_h2": self.sup_h2, "sup_h2_ci95": self.sup_h2_ci,
                "mu_int_v": self.diss_v, "beta_int_l": self.diss_l,
                "estimate": self.estimate, "estimate_ci95": self.estimate_ci,
                "k1": self.k1, "bound": self.bound,
                "bound_constant": self.bound_constant,
                "p2_moment": self.p2_moment, "p2_ci95": self.p2_ci,
                "passed": bool(self.passed)}

    def line(self):
        state = "pass" if self.passed else "FAIL"
        return (f"{state}  moment bound: estimate={self.estimate:.4g} "
                f"(+-{self.estimate_ci:.2g}) <= bound={self.bound:.4g} (m={self.m})")


BOUND_CONSTANT = 26.0  # explicit Gronwall constant of the supremum estimate


def moment_bound_check(cfg, m, jobs=1):
    """Check E[sup ||u||^2] + mu E int ||u||_V^2 + beta E int ||u||^{r+1}
    against (2 E||u0||^2 + C K1 T) exp(C K1 T) with the certified K1."""
    basis = build_basis(cfg.d, cfg.n)
    sigma = cfg.sigma_family()
    gamma = cfg.gamma_family(basis)
    q = cfg.qspectrum()
    k1 = (sigma.growth_constant(q, basis) if sigma else 0.0) \
        + (gamma.growth_constant() if gamma else 0.0)
    rows, tripped = _run_chunks(cfg, m, jobs)
    sup_h2 = rows[:, 6]
    per_path = sup_h2 + cfg.mu * rows[:, 2] + cfg.beta * rows[:, 3]
    est = float(np.mean(per_path))
    ci = float(1.96 * np.std(per_path, ddof=1) / np.sqrt(per_path.size))
    e0 = cfg.initial(basis).norm_h() ** 2
    c = BOUND_CONSTANT
    bound = (2.0 * e0 + c * k1 * cfg.T) * np.exp(c * k1 * cfg.T)
    p2 = sup_h2 ** 2
    return MomentReport(
        m=int(rows.shape[0]), excluded=tripped,
        sup_h2=float(np.mean(sup_h2)),
        sup_h2_ci=float(1.96 * np.std(sup_h2, ddof=1) / np.sqrt(sup_h2.size)),
        diss_v=float(cfg.mu * np.mean(rows[:, 2])),
        diss_l=float(cfg.beta * np.mean(rows[:, 3])),
        estimate=est, estimate_ci=ci, k1=k1, bound=float(bound),
        bound_constant=c, p2_moment=float(np.mean(p2)),
        p2_ci=float(1.96 * np.std(p2, ddof=1) / np.sqrt(p2.size)),
        passed=bool(est + ci <= bound))


# -- operator property suites -------------------------------------------------


def _pair_grid_values(basis, rng, count, N, decay=0.5, amplitude=2.0):
    """Batched grid samples of `count` random field pairs (U, V)."""
    plan = basis.plan(N)
    M, P = basis.n_wavevectors, basis.n_polarizations
    out = []
    for _ in range(2):
        c = rng.standard_normal((count, M, P)) + 1j * rng.standard_normal((count, M, P))
        c *= basis.ksq.astype(float)[None, :, None] ** (-decay / 2.0)
        c = 0.5 * (c + np.conj(c[:, basis.conj_idx, :]))
        scale = amplitude / np.sqrt(np.sum(np.abs(c) ** 2, axis=(1, 2)))
        c *= scale[:, None, None]
        out.append(plan.to_grid(c))
    return out


def check_monotonicity(r, m, d=2, n=4, seed=0, tol=1e-10, chunk=256):
    """Pointwise-exact monotonicity chain of the absorption operator.

    Verifies, per random pair on a shared collocation grid, that
    <C(u)-C(v), u-v> dominates both the half-sum of weighted difference
    norms and 2^{1-r} ||u-v||^{r+1}_{L^{r+1}}.
    """
    basis = build_basis(d, n)
    from .basis import min_grid
    N = min_grid(n - 1, max(2, int(np.ceil(r)) + 1))
    cell = (2 * np.pi / N) ** d
    rng = stream(seed, 0, 0)
    worst = np.inf
    done = 0
    while done < m:
        take = min(chunk, m - done)
        U, V = _pair_grid_values(basis, rng, take, N)
        su = np.sqrt(np.sum(U ** 2, axis=1))
        sv = np.sqrt(np.sum(V ** 2, axis=1))
        W = U - V
        w2 = np.sum(W ** 2, axis=1)
        # <C(u)-C(v), u-v> pointwise: (|u|^{r-1} u - |v|^{r-1} v) . (u - v)
        integrand = np.sum((su[:, None] ** (r - 1) * U
                            - sv[:, None] ** (r - 1) * V) * W, axis=1)
        lhs = np.sum(integrand, axis=tuple(range(1, 1 + d))) * cell
        mid = 0.5 * np.sum((su ** (r - 1) + sv ** (r - 1)) * w2,
                           axis=tuple(range(1, 1 + d))) * cell
        rhs = 2.0 ** (1 - r) * np.sum(w2 ** ((r + 1) / 2.0),
                                      axis=tuple(range(1, 1 + d))) * cell
        worst = min(worst, float(np.min(lhs - rhs)), float(np.min(lhs - mid)))
        done += take
    return PropertyReport(name=f"absorption-monotonicity-r{r}-d{d}", samples=m,
                          worst=worst, tol=tol, passed=worst >= -tol, seed=seed,
                          extra={"r": r, "d": d, "n": n})


def trilinear_suite(d, n, m, seed=0, tol=1e-10, dealias="exact-convolution"):
    """Energy neutrality and antisymmetry of the convection form."""
    from .operators import OperatorConfig
    basis = build_basis(d, n)
    cfg = OperatorConfig(r=1.0, dealias=dealias)
    rng = stream(seed, 0, 0)
    worst_neutral = 0.0
    worst_anti = 0.0
    for _ in range(m):
        u = random_field(basis, rng, decay=0.5)
        v = random_field(basis, rng, decay=0.5)
        w = random_field(basis, rng, decay=0.5)
        Buv = apply_convection(u, v, cfg)
        Buw = apply_convection(u, w, cfg)
        neutral = abs(inner_h(Buv, v)) / (u.norm_h() * v.norm_v() ** 2)
        anti = (abs(inner_h(Buv, w) + inner_h(Buw, v))
                / (u.norm_h() * v.norm_v() * w.norm_v()))
        worst_neutral = max(worst_neutral, neutral)
        worst_anti = max(worst_anti, anti)
    worst = max(worst_neutral, worst_anti)
    return PropertyReport(name=f"convection-identities-d{d}", samples=m,
                          worst=worst, tol=tol, passed=worst <= tol, seed=seed,
                          extra={"neutrality": worst_neutral, "antisymmetry": worst_anti,
                                 "n": n, "dealias": dealias})


def stokes_identity_suite(d, n, m, seed=0, tol=1e-12):
    """<A u, u> = ||u||_V^2 over a random corpus."""
    basis = build_basis(d, n)
    rng = stream(seed, 0, 0)
    worst = 0.0
    for _ in range(m):
        u = random_field(basis, rng, decay=0.3)
        lhs = inner_h(apply_stokes(u), u)
        rhs = u.norm_v() ** 2
        worst = max(worst, abs(lhs - rhs) / rhs)
    return PropertyReport(name=f"stokes-identity-d{d}", samples=m, worst=worst,
                          tol=tol, passed=worst <= tol, seed=seed, extra={"n": n})


def absorption_identity_suite(r, m, d=2, n=4, seed=0, tol=1e-10):
    """<C(u), u> equals the collocation integral of |u|^{r+1}."""
    from .operators import OperatorConfig
    basis = build_basis(d, n)
    cfg = OperatorConfig(r=r)
    N = cfg.grid_absorption(basis)
    rng = stream(seed, 0, 0)
    worst = 0.0
    for _ in range(m):
        u = random_field(basis, rng, decay=0.5, amplitude=2.0)
        lhs = inner_h(apply_absorption(u, cfg), u)
        rhs = lp_norm(u, r + 1.0, N=N) ** (r + 1.0)
        worst = max(worst, abs(lhs - rhs) / max(rhs, 1e-300))
    return PropertyReport(name=f"absorption-identity-r{r}", samples=m, worst=worst,
                          tol=tol, passed=worst <= tol, seed=seed,
                          extra={"r": r, "d": d, "n": n})


def convection_bound_suite(r, m, d=2, n=4, seed=0, tol=1e-8):
    """Dual-norm bound ||B(u)||_{V'} <= ||u||_{L^{r+1}}^{(r+1)/(r-1)} ||u||_H^{(r-3)/(r-1)}
    for fast-growing exponents r > 3."""
    from .operators import OperatorConfig, dual_norm_vprime
    if r <= 3:
        raise ValueError("bound applies for r > 3")
    basis = build_basis(d, n)
    cfg = OperatorConfig(r=r, dealias="exact-convolution")
    from .basis import min_grid
    N = min_grid(n - 1, int(np.ceil(r)) + 1)
    rng = stream(seed, 0, 0)
    worst = 0.0
    for _ in range(m):
        u = random_field(basis, rng, decay=0.5, amplitude=1.5)
        bu = apply_convection(u, u, cfg)
        lhs = dual_norm_vprime(bu)
        rhs = (lp_norm(u, r + 1.0, N=N) ** ((r + 1.0) / (r - 1.0))
               * u.norm_h() ** ((r - 3.0) / (r - 1.0)))
        worst = max(worst, lhs / rhs)
    return PropertyReport(name=f"convection-dual-bound-r{r}", samples=m,
                          worst=worst, tol=1.0 + tol, passed=worst <= 1.0 + tol,
                          seed=seed, extra={"r": r, "d": d, "n": n})


def absorption_lipschitz_suite(r, m, d=2, n=4, seed=0, tol=1e-8, chunk=256):
    """Local Lipschitz bound of the absorption nonlinearity.

    Ratio of ||C(u)-C(v)||_{L^{(r+1)/r}} (pointwise difference before
    projection) to r (||u|| + ||v||)^{r-1} ||u - v||, all L^{r+1} norms on
    one shared grid; discrete Hoelder makes the ratio <= 1 up to rounding.
    """
    basis = build_basis(d, n)
    from .basis import min_grid
    N = min_grid(n - 1, max(2, int(np.ceil(r)) + 1))
    cell = (2 * np.pi / N) ** d
    rng = stream(seed, 0, 0)
    q = (r + 1.0) / r
    worst = 0.0
    done = 0
    while done < m:
        take = min(chunk, m - done)
        U, V = _pair_grid_values(basis, rng, take, N)
        su = np.sqrt(np.sum(U ** 2, axis=1))
        sv = np.sqrt(np.sum(V ** 2, axis=1))
        diff = su[:, None] ** (r - 1) * U - sv[:, None] ** (r - 1) * V
        sdiff = np.sqrt(np.sum(diff ** 2, axis=1))
        sw = np.sqrt(np.sum((U - V) ** 2, axis=1))
        ax = tuple(range(1, 1 + d))
        num = (np.sum(sdiff ** q, axis=ax) * cell) ** (1.0 / q)
        nu = (np.sum(su ** (r + 1), axis=ax) * cell) ** (1.0 / (r + 1.0))
        nv = (np.sum(sv ** (r + 1), axis=ax) * cell) ** (1.0 / (r + 1.0))
        nw = (np.sum(sw ** (r + 1), axis=ax) * cell) ** (1.0 / (r + 1.0))
        den = r * (nu + nv) ** (r - 1.0) * nw
        ok = den > 0
        if np.any(ok):
            worst = max(worst, float(np.max(num[ok] / den[ok])))
        done += take
    return PropertyReport(name=f"absorption-lipschitz-r{r}", samples=m,
                          worst=worst, tol=1.0 + tol, passed=worst <= 1.0 + tol,
                          seed=seed, extra={"r": r, "d": d, "n": n})


def smoothing_suite(m, d=2, n=8, seed=0, bound=2.0, exponents=(2.0, 4.0)):
    """Empirical L^p boundedness of the smoothed spectral projection."""
    from .operators import smooth_project
    basis = build_basis(d, n)
    rng = stream(seed, 0, 0)
    worst = 0.0
    for _ in range(m):
        u = random_field(basis, rng, decay=0.7)
        for smooth_n in (2, 4, 8):
            pu = smooth_project(u, smooth_n)
            for p in exponents:
                ratio = lp_norm(pu, p) / lp_norm(u, p)
                worst = max(worst, ratio)
    return PropertyReport(name="smoothing-lp-bound", samples=m, worst=worst,
                          tol=bound, passed=worst <= bound, seed=seed,
                          extra={"d": d, "n": n, "exponents": list(exponents)})


# -- noise statistical suites -------------------------------------------------


def wiener_statistics_suite(cfg, m=10000, seed=None):
    """Per-mode increment variance and the H-energy rate against Tr Q."""
    from .noise import sample_wiener_increment
    from .rng import WIENER
    basis = build_basis(cfg.d, cfg.n)
    q = cfg.qspectrum()
    rng = stream(cfg.seed if seed is None else seed, 0, WIENER)
    dt = cfg.dt
    M, P = basis.n_wavevectors, basis.n_polarizations
    sq_sum = np.zeros((M, P))
    h2 = np.zeros(m)
    for i in range(m):
        dw = sample_wiener_increment(q, basis, dt, rng)
        sq = np.abs(dw.coeffs) ** 2
        sq_sum += sq
        h2[i] = np.sum(sq)
    # E|c_{k,p}|^2 = mu_k dt per complex coefficient
    target = q.mode_weights(basis)[:, None] * dt * np.ones((1, P))
    mean_sq = sq_sum / m
    se = target * np.sqrt(2.0 / m)  # |c|^2 is exponential: sd = mean
    dev = np.max(np.abs(mean_sq - target) / se)
    trace = q.trace(basis)
    rate = np.mean(h2) / dt
    rate_se = np.std(h2 / dt, ddof=1) / np.sqrt(m)
    trace_dev = abs(rate - trace) / rate_se
    worst = max(float(dev), float(trace_dev))
    return PropertyReport(name="wiener-increment-statistics", samples=m,
                          worst=worst, tol=cfg.stat_sigmas,
                          passed=worst <= cfg.stat_sigmas, seed=cfg.seed,
                          extra={"trace_q": trace, "empirical_rate": float(rate),
                                 "per_mode_max_sigmas": float(dev),
                                 "trace_sigmas": float(trace_dev)})


def poisson_count_suite(cfg, m=10000, seed=None):
    """Mean jump count and chi-square goodness of fit at the 1% level."""
    from .noise import sample_jumps
    from .rng import JUMP_TIMES, MARKS
    spec = cfg.jump_spec()
    lam = spec.intensity * cfg.T
    counts = np.zeros(m, dtype=int)
    base = cfg.seed if seed is None else seed
    for i in range(m):
        t, _ = sample_jumps(spec, cfg.T, stream(base, i, JUMP_TIMES),
                            stream(base, i, MARKS))
        counts[i] = t.size
    mean = counts.mean()
    se = counts.std(ddof=1) / np.sqrt(m)
    mean_sigmas = abs(mean - lam) / se
    # pool bins so every expected count is at least 5
    kmax = int(_stats.poisson.ppf(1 - 1e-6, lam)) + 1
    probs = _stats.poisson.pmf(np.arange(kmax), lam)
    probs = np.append(probs, 1.0 - probs.sum())
    expected = probs * m
    observed = np.bincount(np.minimum(counts, kmax), minlength=kmax + 1)
    keep_rows = []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= 5.0:
            keep_rows.append((acc_o, acc_e))
            acc_o = acc_e = 0.0
    if acc_e > 0 and keep_rows:
        o, e = keep_rows[-1]
        keep_rows[-1] = (o + acc_o, e + acc_e)
    obs_b, exp_b = np.array(keep_rows).T
    chi2 = float(np.sum((obs_b - exp_b) ** 2 / exp_b))
    dof = max(len(obs_b) - 1, 1)
    crit = float(_stats.chi2.ppf(0.99, dof))
    passed = (chi2 <= crit) and (mean_sigmas <= cfg.stat_sigmas)
    return PropertyReport(name="poisson-count-gof", samples=m,
                          worst=chi2 / crit, tol=1.0, passed=passed, seed=cfg.seed,
                          extra={"chi2": chi2, "dof": dof, "critical_1pct": crit,
                                 "mean_sigmas": float(mean_sigmas),
                                 "expected_count": lam, "observed_mean": float(mean)})


def ito_isometry_suite(cfg, m=10000, seed=None):
    """Frozen-state jump-integral isometry and compensated mean-zero check.

    For fixed u the compensated integral is G (sum h(z_i) - T m1) g, so its
    squared H-norm has expectation G^2 m2 T; the pairing with a fixed test
    field phi must be mean zero.
    """
    from .noise import sample_jumps
    from .rng import JUMP_TIMES, MARKS
    basis = build_basis(cfg.d, cfg.n)
    gamma = cfg.gamma_family(basis)
    if gamma is None:
        raise ValueError("isometry suite needs jump noise enabled")
    base = cfg.seed if seed is None else seed
    u_norm = 1.0
    G = gamma.gain(u_norm)
    phi = random_field(basis, stream(base, 0, PERTURB), decay=0.5)
    pairing_coeff = inner_h(gamma.direction, phi)
    sq = np.zeros(m)
    pair = np.zeros(m)
    for i in range(m):
        _, marks = sample_jumps(gamma.spec, cfg.T, stream(base, i, JUMP_TIMES),
                                stream(base, i, MARKS))
        integral = G * (marks.sum() - cfg.T * gamma.spec.m1)
        sq[i] = integral ** 2  # ||g|| = 1
        pair[i] = integral * pairing_coeff
    target = G ** 2 * gamma.spec.m2 * cfg.T
    iso_sig = abs(np.mean(sq) - target) / (np.std(sq, ddof=1) / np.sqrt(m))
    mart_sig = abs(np.mean(pair)) / (np.std(pair, ddof=1) / np.sqrt(m))
    worst = max(float(iso_sig), float(mart_sig))
    return PropertyReport(name="jump-ito-isometry", samples=m, worst=worst,
                          tol=cfg.stat_sigmas, passed=worst <= cfg.stat_sigmas,
                          seed=cfg.seed,
                          extra={"isometry_sigmas": float(iso_sig),
                                 "martingale_sigmas": float(mart_sig),
                                 "target_second_moment": target,
                                 "empirical_second_moment": float(np.mean(sq))})


def compensator_mc_suite(cfg, m=10000, seed=None):
    """Mean of the raw jump sum against T times the closed-form drift."""
    from .noise import sample_jumps
    from .rng import JUMP_TIMES, MARKS
    basis = build_basis(cfg.d, cfg.n)
    gamma = cfg.gamma_family(basis)
    if gamma is None:
        raise ValueError("compensator suite needs jump noise enabled")
    base = cfg.seed if seed is None else seed
    G = gamma.gain(0.0)
    sums = np.zeros(m)
    for i in range(m):
        _, marks = sample_jumps(gamma.spec, cfg.T, stream(base, i, JUMP_TIMES),
                                stream(base, i, MARKS))
        sums[i] = G * marks.sum()
    target = cfg.T * G * gamma.spec.m1
    se = np.std(sums, ddof=1) / np.sqrt(m)
    sig = abs(np.mean(sums) - target) / se if se > 0 else 0.0
    return PropertyReport(name="compensator-mean", samples=m, worst=float(sig),
                          tol=cfg.stat_sigmas, passed=sig <= cfg.stat_sigmas,
                          seed=cfg.seed, extra={"target": target,
                                                "empirical": float(np.mean(sums))})


def certification_suite(cfg, n_pairs=1000, norm_max=100.0):
    """Certify the configured noise families against their declared constants.

    The corpus spans ||u||_H from 0 to norm_max on a geometric ladder with
    random directions; the declared constants come in closed form from the
    family parameters.
    """
    from .noise import certify_hypotheses
    basis = build_basis(cfg.d, cfg.n)
    q = cfg.qspectrum()
    sigma = cfg.sigma_family()
    gamma = cfg.gamma_family(basis)
    rng = stream(cfg.seed, 0, PERTURB)
    amps = np.concatenate([[0.0], np.geomspace(1e-3, norm_max, n_pairs - 1)])
    pairs = [(random_field(basis, rng, decay=0.5, amplitude=a),
              random_field(basis, rng, decay=0.5, amplitude=float(rng.uniform(0, norm_max))))
             for a in amps]
    cert = certify_hypotheses(sigma, gamma, q, basis, pairs)
    ratios = [cert.k1_observed / cert.k1_declared if cert.k1_declared else 0.0,
              cert.k2_observed / cert.k2_declared if cert.k2_declared else 0.0,
              cert.lip_observed / cert.lip_declared if cert.lip_declared else 0.0]
    return PropertyReport(name="noise-hypothesis-certification", samples=n_pairs,
                          worst=float(max(ratios)), tol=1.0 + 1e-6,
                          passed=cert.ok, seed=cfg.seed,
                          extra={"K1": cert.k1_declared, "K1_observed": cert.k1_observed,
                                 "K2": cert.k2_declared, "K2_observed": cert.k2_observed,
                                 "L": cert.lip_declared, "L_observed": cert.lip_observed,
                                 "failures": [f[0] for f in cert.failures]})


def stationary_variance_check(cfg, m=4000, modes=((1, 0), (0, 1), (1, 1)), jobs=1):
    """Linear stochastic Stokes: per-mode stationary variance oracle.

    With convection and absorption off and additive noise, each complex
    coefficient is an Ornstein-Uhlenbeck process whose stationary variance
    is mu_k a_k^2 / (2 mu |k|^2); the ensemble variance at the final time
    must match within the configured number of standard errors.
    """
    lin_cfg = replace(cfg, convection=False, beta=0.0, jump_intensity=0.0,
                      sigma_kind="additive", init="zero",
                      output_times=(cfg.T,))
    basis = build_basis(cfg.d, cfg.n)
    rows = basis.mode_rows()
    picks = [rows[kv + (0,) * (cfg.d - len(kv))] for kv in modes]
    if jobs <= 1:
        finals = _stationary_chunk(lin_cfg, tuple(modes), np.arange(m))
    else:
        chunks = np.array_split(np.arange(m), jobs * 4)
        with _futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_stationary_chunk,
                                  [lin_cfg] * len(chunks),
                                  [tuple(modes)] * len(chunks), chunks))
        finals = np.concatenate(parts, axis=0)

    q = lin_cfg.qspectrum()
    sigma = lin_cfg.sigma_family()
    mu_k = q.mode_weights(basis)[picks]
    a_k = sigma.amplitudes(basis)[picks]
    target = mu_k * a_k ** 2 / (2.0 * cfg.mu * basis.ksq[picks])
    sq = np.abs(finals) ** 2
    emp = sq.mean(axis=0)
    se = sq.std(axis=0, ddof=1) / np.sqrt(sq.shape[0])
    sigmas = np.abs(emp - target) / se
    worst = float(np.max(sigmas))
    return PropertyReport(name="stationary-mode-variance", samples=m, worst=worst,
                          tol=cfg.stat_sigmas, passed=worst <= cfg.stat_sigmas,
                          seed=cfg.seed,
                          extra={"modes": [list(kv) for kv in modes],
                                 "target": target.tolist(),
                                 "empirical": emp.tolist(),
                                 "sigmas": sigmas.tolist()})


def _stationary_chunk(lin_cfg, modes, indices):
    basis = build_basis(lin_cfg.d, lin_cfg.n)
    rows = basis.mode_rows()
    picks = [rows[kv + (0,) * (lin_cfg.d - len(kv))] for kv in modes]
    out = np.zeros((len(indices), len(picks)), dtype=np.complex128)
    for j, p in enumerate(indices):
        tr = simulate_path(lin_cfg, basis=basis, path_index=int(p))
        out[j] = tr.states[-1].coeffs[picks, 0]
    return out


# -- twin-run uniqueness contraction ------------------------------------------


class _NodeCapture:
    """Stores the state at every grid node (plus t=0 via explicit init)."""

    def __init__(self):
        self.times = []
        self.coeffs = []

    def on_flow(self, t, h, u, lr1, sig_inc, sig_lq2, comp):
        pass

    def on_jump(self, tau, u_minus, inc):
        pass

    def on_node(self, t, u):
        self.times.append(t)
        self.coeffs.append(u.coeffs.copy())


def gronwall_weight(cfg, times, path_b_coeffs, basis):
    """Accumulated exponent rho(t) of the contraction weight.

    d=2 with r <= 3 uses (27 / 8 mu^3) int ||u_2||_{L^4}^4; exponents
    r > 3 use the constant rate 2 zeta_hat; d=3 with r = 3 (and
    2 beta mu >= 1) needs no weight.
    """
    times = np.asarray(times)
    if cfg.r > 3:
        zeta_hat = ((cfg.r - 3.0) / (2.0 * cfg.mu * (cfg.r - 1.0))
                    * (4.0 / (cfg.beta * cfg.mu * (cfg.r - 1.0))) ** (2.0 / (cfg.r - 3.0)))
        return 2.0 * zeta_hat * times, zeta_hat
    if cfg.d == 3:
        return np.zeros_like(times), 0.0
    from .basis import min_grid
    plan_n = min_grid(cfg.n - 1, 4)
    plan = basis.plan(plan_n)
    cell = (2 * np.pi / plan_n) ** cfg.d
    stack = np.stack(path_b_coeffs)          # (n_nodes, M, P)
    vals = plan.to_grid(stack)               # (n_nodes, d, N, ...)
    l4 = np.sum(np.sum(vals ** 2, axis=1) ** 2,
                axis=tuple(range(1, 1 + cfg.d))) * cell
    rate = 27.0 / (8.0 * cfg.mu ** 3)
    rho = np.concatenate([[0.0], np.cumsum(rate * l4[:-1] * np.diff(times))])
    return rho, rate


def gronwall_uniqueness_test(cfg, delta, m_seeds, jobs=1):
    """CRN twin runs: weighted squared difference against the Gronwall envelope.

    With delta = 0 the difference must be bitwise zero; with delta > 0 the
    weighted difference exp(-rho(t)) ||z(t)||^2 must stay below
    ||z(0)||^2 exp(L T) (1 + tol_scheme) at every node and seed.
    """
    ok, reason = uniqueness_regime(cfg.d, cfg.r, cfg.mu, cfg.beta)
    if not ok:
        raise RegimeError(reason, field="r")
    basis = build_basis(cfg.d, cfg.n)
    q = cfg.qspectrum()
    sigma = cfg.sigma_family()
    gamma = cfg.gamma_family(basis)
    lip = (sigma.lipschitz_constant(q, basis) if sigma else 0.0) \
        + (gamma.lipschitz_constant() if gamma else 0.0)
    envelope_gain = float(np.exp(lip * cfg.T)) * (1.0 + cfg.tol_scheme)
    worst_ratio = 0.0
    details = []
    for s in range(m_seeds):
        cfg_s = replace(cfg, seed=cfg.seed + s)
        u0a = cfg_s.initial(basis)
        if delta == 0.0:
            u0b = u0a
        else:
            pert = random_field(basis, stream(cfg_s.seed, 0, PERTURB),
                                decay=1.0, amplitude=delta)
            u0b = SpectralField(basis, u0a.coeffs + pert.coeffs)
        cap_a, cap_b = _NodeCapture(), _NodeCapture()
        tr_a, tr_b = simulate_pair_crn(cfg_s, u0a, u0b, basis=basis,
                                       observer_a=cap_a, observer_b=cap_b)
        if tr_a.status != "completed" or tr_b.status != "completed":
            raise RuntimeError("guard tripped during twin run")
        times = np.concatenate([[0.0], np.asarray(cap_a.times)])
        za = [u0a.coeffs] + cap_a.coeffs
        zb = [u0b.coeffs] + cap_b.coeffs
        z2 = np.array([np.sum(np.abs(a - b) ** 2) for a, b in zip(za, zb)])
        if delta == 0.0:
            if np.any(z2 != 0.0):
                return PropertyReport(name="pathwise-uniqueness-crn", samples=m_seeds,
                                      worst=float(np.max(z2)), tol=0.0, passed=False,
                                      seed=cfg.seed, extra={"delta": 0.0})
            continue
        rho, _ = gronwall_weight(cfg_s, times, zb, basis)
        weighted = np.exp(-rho) * z2
        ratio = float(np.max(weighted) / (z2[0] * envelope_gain))
        worst_ratio = max(worst_ratio, ratio)
        details.append(ratio)
    if delta == 0.0:
        return PropertyReport(name="pathwise-uniqueness-crn", samples=m_seeds,
                              worst=0.0, tol=0.0, passed=True, seed=cfg.seed,
                              extra={"delta": 0.0, "bitwise_zero": True})
    return PropertyReport(name="pathwise-uniqueness-crn", samples=m_seeds,
                          worst=worst_ratio, tol=1.0, passed=worst_ratio <= 1.0,
                          seed=cfg.seed,
                          extra={"delta": delta, "lipschitz": lip,
                                 "envelope_gain": envelope_gain,
                                 "per_seed_max": details})


# -- spectral self-convergence ------------------------------------------------


def _embed(coeffs, basis_small, basis_large):
    rows_large = basis_large.mode_rows()
    take = np.array([rows_large[tuple(int(c) for c in kv)] for kv in basis_small.k],
                    dtype=np.int64)
    out = np.zeros((basis_large.n_wavevectors, basis_large.n_polarizations),
                   dtype=np.complex128)
    out[take] = coeffs
    return out


@dataclass
class ConvergenceReport:
    cutoffs: list
    sup_differences: list   # sup_t ||u_n - u_2n||_H per consecutive pair
    terminal_differences: list
    rate: float
    monotone: bool
    passed: bool

    def as_dict(self):
        return {"name": "galerkin-self-convergence", "cutoffs": self.cutoffs,
                "sup_differences": self.sup_differences,
                "terminal_differences": self.terminal_differences,
                "rate": self.rate, "monotone": bool(self.monotone),
                "passed": bool(self.passed)}

    def line(self):
        state = "pass" if self.passed else "FAIL"
        diffs = ", ".join(f"{x:.3e}" for x in self.sup_differences)
        return f"{state}  spectral self-convergence: diffs [{diffs}] rate={self.rate:.2f}"


def galerkin_convergence_study(cfg, cutoffs, rate_floor=1.0):
    """Consecutive-cutoff differences under one shared noise realization.

    The master record is sampled at the largest cutoff and restricted mode
    by mode, so every run consumes a consistent prefix of the same noise.
    """
    cutoffs = sorted(cutoffs)
    big = build_basis(cfg.d, max(cutoffs))
    master = make_record(replace(cfg, n=max(cutoffs)), big)
    runs = {}
    for n in cutoffs:
        b = build_basis(cfg.d, n)
        rec = restrict_record(master, b, big)
        cfg_n = replace(cfg, n=n)
        tr = simulate_path(cfg_n, basis=b, record=rec)
        if tr.status != "completed":
            raise RuntimeError(f"guard tripped at cutoff {n}")
        runs[n] = (b, tr)
    sup_diffs = []
    term_diffs = []
    for n_small, n_large in zip(cutoffs[:-1], cutoffs[1:]):
        bs, ts = runs[n_small]
        bl, tl = runs[n_large]
        diffs = []
        for us, ul in zip(ts.states, tl.states):
            d = _embed(us.coeffs, bs, bl) - ul.coeffs
            diffs.append(np.sqrt(np.sum(np.abs(d) ** 2)))
        sup_diffs.append(float(np.max(diffs)))
        term_diffs.append(float(diffs[-1]))
    monotone = all(a > b for a, b in zip(sup_diffs[:-1], sup_diffs[1:]))
    if len(term_diffs) >= 2 and all(t > 0 for t in term_diffs):
        x = np.log(np.asarray(cutoffs[:-1], dtype=float))
        y = np.log(np.asarray(term_diffs))
        rate = float(-np.polyfit(x, y, 1)[0])
    else:
        rate = float("inf")
    passed = monotone and rate >= rate_floor
    return ConvergenceReport(cutoffs=list(cutoffs), sup_differences=sup_diffs,
                             terminal_differences=term_diffs, rate=rate,
                             monotone=monotone, passed=passed)


def ledger_residual_orders(cfg, dts):
    """Log-log slope of the terminal ledger residual across step sizes."""
    res = []
    for dt in dts:
        cfg_dt = replace(cfg, dt=dt, output_times=(cfg.T,))
        tr = simulate_path(cfg_dt)
        led = energy_ledger(tr, cfg_dt)
        res.append(abs(float(led.residual[-1])))
    res = np.asarray(res)
    slope = float(np.polyfit(np.log(np.asarray(dts)), np.log(res), 1)[0])
    return res, slope
