"""Jump-adapted tamed Euler-Maruyama integration of the Galerkin system.

The drift is D(u) = -mu A u - (u . grad) u - beta |u|^{r-1} u (each term
projected and truncated); the explicit step divides it by
(1 + h ||D||_H) to control the superlinear absorption term.  The
"exponential-tamed" variant removes the Stokes part from the tamed drift
and instead applies the exact per-mode decay factor exp(-mu |k|^2 h) to
the post-update state.  Jumps land at their exact arrival times: the base
grid is refined by the sampled jump times and each jump is added to the
state at its own node.  The compensator of the jump measure is subtracted
as an explicit drift each substep.
"""

from dataclasses import dataclass, field

import numpy as np

from .basis import SpectralField, build_basis, inner_h
from .noise import NoiseRecord, sample_jumps, sample_wiener_increment
from .operators import apply_absorption, apply_convection, apply_stokes
from .rng import JUMP_TIMES, MARKS, WIENER, stream

_TOL = 1e-12


class GuardTripped(RuntimeError):
    """State norm exceeded the blow-up guard; integration must not continue."""

    def __init__(self, t, norm, guard):
        self.t = t
        self.norm = norm
        self.guard = guard
        super().__init__(f"blow-up guard tripped at t={t}: ||u|| = {norm:.6g} > {guard:.6g}")


@dataclass
class StepScheme:
    """Time-stepping policy."""

    kind: str = "tamed-explicit"  # or "exponential-tamed"
    dt: float = 0.01
    taming: bool = True
    guard: float = np.inf

    def __post_init__(self):
        if self.kind not in ("tamed-explicit", "exponential-tamed"):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not self.guard > 0:
            raise ValueError("guard must be positive")


@dataclass
class SdeState:
    u: SpectralField
    t: float
    steps: int = 0


@dataclass
class Trajectory:
    """Sampled states plus the full noise record enabling exact replay."""

    times: np.ndarray            # requested output times
    states: list                 # SpectralField per output time (cadlag value)
    record: NoiseRecord
    status: str = "completed"    # or "guard-tripped"
    trip_time: float = None

    def state_at(self, t):
        i = int(np.searchsorted(self.times, t + _TOL) - 1)
        return self.states[max(i, 0)]


def base_grid(T, dt):
    """Uniform nodes i*dt capped at T (final node snapped exactly to T)."""
    n = int(np.floor(T / dt + 1e-9))
    nodes = np.arange(n + 1) * dt
    if nodes[-1] < T - _TOL * max(T, 1.0):
        nodes = np.append(nodes, T)
    else:
        nodes[-1] = T
    return nodes


def jump_adapted_grid(T, dt, jump_times):
    """Sorted union of the base grid and the jump times (deduplicated)."""
    nodes = np.concatenate([base_grid(T, dt), np.asarray(jump_times, dtype=float)])
    nodes.sort()
    tol = _TOL * max(T, 1.0)
    keep = np.ones(nodes.size, dtype=bool)
    keep[1:] = np.diff(nodes) > tol
    return nodes[keep]


def _drift(u, opcfg, scheme, convection):
    """Drift to be tamed: excludes the Stokes part for exponential stepping."""
    coeffs = np.zeros_like(u.coeffs)
    lr1 = 0.0
    if scheme.kind == "tamed-explicit":
        coeffs -= opcfg.mu * apply_stokes(u).coeffs
    if convection:
        coeffs -= apply_convection(u, u, opcfg).coeffs
    if opcfg.beta > 0:
        cu = apply_absorption(u, opcfg)
        coeffs -= opcfg.beta * cu.coeffs
        lr1 = inner_h(cu, u)  # equals ||u||^{r+1}_{L^{r+1}} on the same grid
    return coeffs, lr1


def _flow(u, t, h, dW, scheme, opcfg, sigma, gamma, qspec, convection, observer):
    """Advance the continuous part over (t, t+h]; returns the pre-jump state."""
    D, lr1 = _drift(u, opcfg, scheme, convection)
    if scheme.taming and h > 0:
        D = D / (1.0 + h * float(np.sqrt(np.sum(np.abs(D) ** 2))))
    new = u.coeffs + h * D
    u_norm = u.norm_h()
    sig_inc = None
    sig_lq2 = 0.0
    if sigma is not None:
        sig_inc = sigma.apply(u_norm, dW)
        sig_lq2 = sigma.lq_norm_sq(qspec, u.basis, u_norm)
        new = new + sig_inc.coeffs
    comp = None
    if gamma is not None:
        comp = gamma.compensator_rate(u_norm)
        new = new - h * comp.coeffs
    if scheme.kind == "exponential-tamed":
        new = new * np.exp(-opcfg.mu * u.basis.ksq * h)[:, None]
    if observer is not None:
        observer.on_flow(t, h, u, lr1, sig_inc, sig_lq2, comp)
    out = SpectralField(u.basis, new)
    norm = out.norm_h()
    if not np.isfinite(norm) or norm > scheme.guard:
        raise GuardTripped(t + h, norm, scheme.guard)
    return out


def _apply_jumps(u, tau, marks, gamma, observer):
    """Add gamma(tau, u(tau-), z) for each mark arriving at time tau."""
    for z in marks:
        inc = gamma.jump_increment(u.norm_h(), float(z))
        if observer is not None:
            observer.on_jump(tau, u, inc)
        u = SpectralField(u.basis, u.coeffs + inc.coeffs)
    return u


def step(state, scheme, opcfg, dW_parts, jumps_in_step,
         sigma=None, gamma=None, qspec=None, convection=True, observer=None):
    """One base step from state.t, subdivided at the jump times inside it.

    `jumps_in_step` is a sorted list of (time, mark) with times in
    (state.t, state.t + scheme.dt]; `dW_parts` supplies one Wiener
    increment per sub-interval (len(jumps_in_step) + 1 of them).
    """
    t_end = state.t + scheme.dt
    times = [tau for tau, _ in jumps_in_step] + [t_end]
    if len(dW_parts) != len(times):
        raise ValueError("need one Wiener increment per sub-interval")
    u, t = state.u, state.t
    for (tau, dW) in zip(times, dW_parts):
        u = _flow(u, t, tau - t, dW, scheme, opcfg, sigma, gamma, qspec,
                  convection, observer)
        marks = [z for tz, z in jumps_in_step if tz == tau]
        if marks and gamma is not None:
            u = _apply_jumps(u, tau, marks, gamma, observer)
        t = tau
    return SdeState(u=u, t=t, steps=state.steps + 1)


def simulate_path(cfg, basis=None, record=None, path_index=0, observer=None,
                  initial=None):
    """Integrate one trajectory of the configured system over [0, T].

    With `record` given, the stored noise is replayed bit-exactly instead
    of sampling fresh streams.  The initial state is the projection of the
    configured initial field onto the basis.
    """
    if basis is None:
        basis = build_basis(cfg.d, cfg.n)
    opcfg = cfg.operator_config()
    qspec = cfg.qspectrum()
    sigma = cfg.sigma_family()
    gamma = cfg.gamma_family(basis)
    u = initial.copy() if initial is not None else cfg.initial(basis)
    guard = cfg.guard_factor * max(u.norm_h(), 1.0)
    scheme = StepScheme(kind=cfg.scheme, dt=cfg.dt, taming=cfg.taming, guard=guard)

    if record is not None:
        jump_times, jump_marks = record.jump_times, record.jump_marks
    elif gamma is not None and cfg.T > 0:
        jump_times, jump_marks = sample_jumps(
            gamma.spec, cfg.T,
            stream(cfg.seed, path_index, JUMP_TIMES),
            stream(cfg.seed, path_index, MARKS))
    else:
        jump_times, jump_marks = np.empty(0), np.empty(0)

    outputs = np.asarray(cfg.outputs(), dtype=float)
    out_states = []

    if cfg.T == 0:
        rec = record if record is not None else NoiseRecord(
            seed=cfg.seed, path_index=path_index, d=cfg.d, n=cfg.n, T=0.0,
            dt=cfg.dt, wiener=np.zeros((0, basis.n_wavevectors,
                                        basis.n_polarizations), np.complex128),
            jump_times=np.empty(0), jump_marks=np.empty(0))
        return Trajectory(times=outputs, states=[u.copy() for _ in outputs], record=rec)

    grid = jump_adapted_grid(cfg.T, cfg.dt, jump_times)
    tol = _TOL * max(cfg.T, 1.0)
    jump_node = np.searchsorted(grid, jump_times - tol)
    n_sub = grid.size - 1

    rng_w = None
    if record is None:
        rng_w = stream(cfg.seed, path_index, WIENER)
        wiener = np.zeros((n_sub, basis.n_wavevectors, basis.n_polarizations),
                          dtype=np.complex128)
    else:
        if record.wiener.shape[0] != n_sub:
            raise ValueError("record grid does not match configuration")
        wiener = record.wiener

    out_ptr = 0
    status, trip_time = "completed", None

    def emit(upto):
        nonlocal out_ptr
        while out_ptr < outputs.size and outputs[out_ptr] < upto - tol:
            out_states.append(u.copy())
            out_ptr += 1

    try:
        for i in range(n_sub):
            t0, t1 = grid[i], grid[i + 1]
            emit(t1)
            h = t1 - t0
            if record is None:
                dW = (sample_wiener_increment(qspec, basis, h, rng_w)
                      if sigma is not None else
                      SpectralField(basis, wiener[i]))
                wiener[i] = dW.coeffs
            else:
                dW = SpectralField(basis, wiener[i])
            u = _flow(u, t0, h, dW, scheme, opcfg, sigma, gamma, qspec,
                      cfg.convection, observer)
            hits = np.flatnonzero(jump_node == i + 1)
            if hits.size and gamma is not None:
                u = _apply_jumps(u, t1, jump_marks[hits], gamma, observer)
            if observer is not None:
                observer.on_node(t1, u)
    except GuardTripped as exc:
        status, trip_time = "guard-tripped", exc.t
        wiener = wiener[:0] if record is None else wiener
    while out_ptr < outputs.size:
        out_states.append(u.copy())
        out_ptr += 1

    rec = record if record is not None else NoiseRecord(
        seed=cfg.seed, path_index=path_index, d=cfg.d, n=cfg.n, T=cfg.T,
        dt=cfg.dt, wiener=wiener, jump_times=np.asarray(jump_times, float),
        jump_marks=np.asarray(jump_marks, float))
    return Trajectory(times=outputs, states=out_states, record=rec,
                      status=status, trip_time=trip_time)


def make_record(cfg, basis, path_index=0):
    """Sample the full noise realization for a configuration up front."""
    gamma = cfg.gamma_family(basis)
    if gamma is not None and cfg.T > 0:
        jump_times, jump_marks = sample_jumps(
            gamma.spec, cfg.T,
            stream(cfg.seed, path_index, JUMP_TIMES),
            stream(cfg.seed, path_index, MARKS))
    else:
        jump_times, jump_marks = np.empty(0), np.empty(0)
    grid = jump_adapted_grid(cfg.T, cfg.dt, jump_times)
    qspec = cfg.qspectrum()
    n_sub = grid.size - 1
    wiener = np.zeros((n_sub, basis.n_wavevectors, basis.n_polarizations),
                      dtype=np.complex128)
    if cfg.sigma_family() is not None:
        rng_w = stream(cfg.seed, path_index, WIENER)
        for i in range(n_sub):
            wiener[i] = sample_wiener_increment(qspec, basis, grid[i + 1] - grid[i],
                                                rng_w).coeffs
    return NoiseRecord(seed=cfg.seed, path_index=path_index, d=cfg.d, n=cfg.n,
                       T=cfg.T, dt=cfg.dt, wiener=wiener,
                       jump_times=jump_times, jump_marks=jump_marks)


def coarsen_record(record, factor):
    """Same noise realization on a base grid coarsened by an integer factor.

    Wiener increments are summed over merged sub-intervals; jump times and
    marks are unchanged (the grid stays jump-adapted at every level).
    """
    fine = jump_adapted_grid(record.T, record.dt, record.jump_times)
    coarse_dt = record.dt * factor
    coarse = jump_adapted_grid(record.T, coarse_dt, record.jump_times)
    tol = _TOL * max(record.T, 1.0)
    bucket = np.searchsorted(coarse[1:], fine[1:] - tol)
    wiener = np.zeros((coarse.size - 1,) + record.wiener.shape[1:],
                      dtype=np.complex128)
    np.add.at(wiener, bucket, record.wiener)
    return NoiseRecord(seed=record.seed, path_index=record.path_index,
                       d=record.d, n=record.n, T=record.T, dt=coarse_dt,
                       wiener=wiener, jump_times=record.jump_times.copy(),
                       jump_marks=record.jump_marks.copy())


def simulate_pair_crn(cfg, u0a, u0b, basis=None, path_index=0,
                      observer_a=None, observer_b=None):
    """Twin trajectories driven by the identical noise realization."""
    if basis is None:
        basis = build_basis(cfg.d, cfg.n)
    record = make_record(cfg, basis, path_index)
    tr_a = simulate_path(cfg, basis=basis, record=record, initial=u0a,
                         path_index=path_index, observer=observer_a)
    tr_b = simulate_path(cfg, basis=basis, record=record, initial=u0b,
                         path_index=path_index, observer=observer_b)
    return tr_a, tr_b
