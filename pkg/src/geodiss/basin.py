"""Sublevel-set basin certificates for equilibria and periodic orbits.

A certificate for a target (an asymptotically stable equilibrium, or a
periodic orbit inside the degeneracy set) at level ``c`` gathers evidence for
three facts about the connected component of the strict sublevel set of the
dissipated quantity, on the target's leaf, containing the target:

  1. the component is bounded (it stays away from the sampling box boundary),
  2. every point of the degeneracy set found inside it lies on the target,
  3. trajectories of the corrected flow started inside it converge to the
     target.

Items 2 and 3 are sampling evidence with verified witnesses, not proofs of
absence: a reported witness is always refined until it classifies inside the
degeneracy set at tight tolerance and lies strictly inside the sublevel set,
but the scan can only disprove the certificate, never establish that no
witness was missed between samples.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .control import _cofactor_from_frame, dissipated_rhs
from .errors import (
    AnchorOutsideLevel,
    LeafProjectionFailure,
    MaxStepsExceeded,
    NonFiniteState,
    NoValidLevel,
    NotAsymptoticallyStable,
    NotOnInvariantSet,
    NotPeriodic,
    StepUnderflow,
    UnboundedTrajectory,
)
from .fields import DissipativeSystem, as_point
from .gram import system_frame
from .integrators import Flow, IntegratorConfig, integrate
from .structure import (
    Stability,
    classify_point,
    project_to_leaf,
    refine_to_invariant_set,
    stability_classify,
)

GRID_DIM_LIMIT = 3


@dataclass(frozen=True)
class SamplerConfig:
    """How the sublevel component is discretized.

    Dimensions up to GRID_DIM_LIMIT use a regular grid with face-adjacency
    flood fill; higher dimensions fall back to random samples joined through
    mutual nearest neighbors.
    """

    cells_per_axis: int = 64
    halfwidth: float | None = None   # None: auto from the anchor norm
    n_samples: int = 4096
    neighbor_count: int = 10
    seed: int = 0


@dataclass(frozen=True)
class SublevelComponent:
    anchor: np.ndarray
    level: float
    leaf_value: np.ndarray
    members: np.ndarray        # leaf points with dissipated value below level
    spacing: float             # cell diagonal, or median sample spacing
    touches_boundary: bool
    method: str


def _auto_halfwidth(anchor: np.ndarray) -> float:
    return max(1.0, 2.0 * float(np.linalg.norm(anchor)) + 0.5)


def _grid_component(system: DissipativeSystem, anchor: np.ndarray, level: float,
                    leaf_value: np.ndarray, cfg: SamplerConfig) -> SublevelComponent:
    n = system.dim
    hw = cfg.halfwidth if cfg.halfwidth is not None else _auto_halfwidth(anchor)
    n_cells = cfg.cells_per_axis
    cell = 2.0 * hw / n_cells
    diag = cell * np.sqrt(n)
    lo = anchor - hw
    axes = [lo[i] + (np.arange(n_cells) + 0.5) * cell for i in range(n)]

    conserved = system.conserved
    members: dict[tuple, np.ndarray] = {}
    for idx in np.ndindex(*([n_cells] * n)):
        center = np.array([axes[i][idx[i]] for i in range(n)])
        ok = True
        for f, target in zip(conserved, leaf_value):
            gap = abs(f(center) - target)
            if gap > 1.5 * diag * float(np.linalg.norm(f.d(center))) + 1e-12:
                ok = False
                break
        if not ok:
            continue
        if system.k > 0:
            try:
                y = project_to_leaf(system, center, leaf_value,
                                    tol=1e-10, max_iter=20)
            except LeafProjectionFailure:
                continue
            if float(np.linalg.norm(y - center)) > diag:
                continue
        else:
            y = center
        if system.dissipated(y) < level:
            members[idx] = y

    anchor_idx = tuple(
        int(np.clip(np.floor((anchor[i] - lo[i]) / cell), 0, n_cells - 1))
        for i in range(n)
    )
    members.setdefault(anchor_idx, anchor.copy())

    # flood fill over face neighbors
    seen = {anchor_idx}
    queue = [anchor_idx]
    touches = False
    while queue:
        cur = queue.pop()
        if any(c == 0 or c == n_cells - 1 for c in cur):
            touches = True
        for axis in range(n):
            for d in (-1, 1):
                nxt = list(cur)
                nxt[axis] += d
                if not (0 <= nxt[axis] < n_cells):
                    continue
                nxt = tuple(nxt)
                if nxt in members and nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)

    pts = np.array([members[i] for i in sorted(seen)])
    return SublevelComponent(anchor=anchor, level=level, leaf_value=leaf_value,
                             members=pts, spacing=float(diag),
                             touches_boundary=touches, method="grid")


def _sampled_component(system: DissipativeSystem, anchor: np.ndarray, level: float,
                       leaf_value: np.ndarray, cfg: SamplerConfig) -> SublevelComponent:
    hw = cfg.halfwidth if cfg.halfwidth is not None else _auto_halfwidth(anchor)
    rng = np.random.default_rng(cfg.seed)
    raw = anchor + rng.uniform(-hw, hw, size=(cfg.n_samples, system.dim))
    kept = [anchor.copy()]
    for p in raw:
        if system.k > 0:
            try:
                y = project_to_leaf(system, p, leaf_value, tol=1e-10, max_iter=20)
            except LeafProjectionFailure:
                continue
        else:
            y = p
        if float(np.max(np.abs(y - anchor))) > hw:
            continue
        if system.dissipated(y) < level:
            kept.append(y)
    pts = np.array(kept)

    m = len(pts)
    k_nn = min(cfg.neighbor_count, m - 1)
    if k_nn <= 0:
        return SublevelComponent(anchor=anchor, level=level, leaf_value=leaf_value,
                                 members=pts, spacing=hw, touches_boundary=False,
                                 method="sampled")
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1)[:, :k_nn]
    neigh = [set(row.tolist()) for row in order]
    spacing = float(np.median([dist[i, order[i, -1]] for i in range(m)]))

    seen = {0}
    queue = [0]
    while queue:
        cur = queue.pop()
        for j in neigh[cur]:
            if cur in neigh[j] and j not in seen:   # mutual edge only
                seen.add(j)
                queue.append(j)
    comp = pts[sorted(seen)]
    touches = bool(np.any(np.max(np.abs(comp - anchor), axis=1)
                          > hw - 2.0 * spacing))
    return SublevelComponent(anchor=anchor, level=level, leaf_value=leaf_value,
                             members=comp, spacing=spacing,
                             touches_boundary=touches, method="sampled")


def sublevel_component(system: DissipativeSystem, anchor, level: float,
                       sampler: SamplerConfig | None = None) -> SublevelComponent:
    """Connected component, on the anchor's leaf, of {dissipated < level}."""
    anchor = as_point(anchor, system.dim)
    # equality admitted: the degenerate level G(anchor) yields the singleton
    # component and a vacuous certificate
    if not system.dissipated(anchor) <= level:
        raise AnchorOutsideLevel(
            f"dissipated value {system.dissipated(anchor):.6g} at the anchor "
            f"exceeds the level {level:.6g}")
    cfg = sampler or SamplerConfig()
    leaf_value = system.leaf_value(anchor)
    if system.dim <= GRID_DIM_LIMIT:
        return _grid_component(system, anchor, level, leaf_value, cfg)
    return _sampled_component(system, anchor, level, leaf_value, cfg)


def scan_invariant_witnesses(system: DissipativeSystem,
                             component: SublevelComponent,
                             max_refine: int = 800,
                             susp_ratio: float = 0.05,
                             susp_g: float = 0.25) -> np.ndarray:
    """Verified degeneracy-set points inside the component, found by refinement.

    Member points are ranked by how close they already sit to gradient
    dependence (scale-free determinant ratio) or to a critical point of the
    dissipated quantity (gradient norm); the most suspicious ones are refined
    on the leaf. A refined point counts only when it classifies inside the
    degeneracy set at tight tolerance, stays within twice the sampling
    spacing, and its dissipated value is strictly below the level (equality
    is admitted only at the anchor, mirroring the anchor's admission into
    the component), so every returned witness genuinely contradicts (or, at
    the target, supports) the certificate.
    """
    pts = component.members
    if pts.size == 0:
        return np.zeros((0, system.dim))
    ratios = np.empty(len(pts))
    gnorms = np.empty(len(pts))
    for i, p in enumerate(pts):
        fr = system_frame(system, p)
        scale = fr.classification_scale()
        ratios[i] = fr.det_full() / scale if scale > 0 else 0.0
        gnorms[i] = fr.grad_g_norm()
    score = np.minimum(ratios / susp_ratio, gnorms / susp_g)
    candidates = np.where(score <= 1.0)[0]
    candidates = candidates[np.argsort(score[candidates])]
    # spatial thinning before the refinement cap: a purely score-ordered cut
    # concentrates on grid-lucky spots and can starve whole stretches of an
    # extended degeneracy locus of any refinement attempt
    chosen: list[int] = []
    min_gap = 0.4 * component.spacing
    for i in candidates:
        if len(chosen) >= max_refine:
            break
        if chosen:
            gaps = np.linalg.norm(pts[chosen] - pts[i], axis=1)
            if float(np.min(gaps)) < min_gap:
                continue
        chosen.append(int(i))
    candidates = chosen

    witnesses: list[np.ndarray] = []
    for i in candidates:
        y = refine_to_invariant_set(system, pts[i], component.leaf_value,
                                    trust_radius=2.0 * component.spacing,
                                    tol_inv=1e-12, tol_g=1e-8)
        if y is None:
            continue
        if not system.dissipated(y) < component.level:
            # the anchor is admitted into the component at equality, so the
            # degenerate level still gets its supporting witness at the
            # target; away from the anchor the strict inequality stands
            if float(np.linalg.norm(y - component.anchor)) > 0.25 * component.spacing:
                continue
        if any(np.linalg.norm(y - w) < 0.25 * component.spacing
               for w in witnesses):
            continue
        witnesses.append(y)
    if not witnesses:
        return np.zeros((0, system.dim))
    return np.array(witnesses)


def _control_norm(system: DissipativeSystem, x: np.ndarray) -> float:
    return float(np.linalg.norm(_cofactor_from_frame(system_frame(system, x))))


def _auto_horizon(system: DissipativeSystem, starts, distance_fn,
                  floor: float = 20.0, cap: float = 500.0) -> float:
    rates = []
    for x in starts:
        d = distance_fn(x)
        if d > 1e-6:
            rates.append(_control_norm(system, x) / d)
    if not rates:
        return floor
    med = float(np.median(rates))
    if med <= 0:
        return cap
    return float(np.clip(50.0 / med, floor, cap))


_INTEGRATION_FAILURES = (StepUnderflow, MaxStepsExceeded, NonFiniteState,
                         UnboundedTrajectory)


def _run_trajectories(system, starts, distance_fn, horizon, converge_tol,
                      integrator, bound):
    """Integrate each start; return (converged, failures, max recorded G).

    The max of the dissipated value over every recorded state is forward
    invariance evidence: a certified component must never be exited upward,
    so the caller compares it against the level plus the integrator band.
    """
    base = integrator or IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10)
    cfg = replace(base, t_end=horizon)
    converged = 0
    failures = []
    g_max = -np.inf
    for x0 in starts:
        try:
            tr = integrate(system, x0, cfg, flow=Flow.PERTURBED, bound=bound)
        except _INTEGRATION_FAILURES as exc:
            failures.append({"start": x0.tolist(), "finalDistance": None,
                             "error": type(exc).__name__})
            continue
        g_max = max(g_max, float(np.max(tr.dissipated_values)))
        d = distance_fn(tr.final_state)
        if d <= converge_tol:
            converged += 1
        else:
            failures.append({"start": x0.tolist(),
                             "final": tr.final_state.tolist(),
                             "finalDistance": d, "error": None})
    return converged, failures, g_max


@dataclass(frozen=True)
class BasinCertificate:
    """Evidence that a sublevel component lies in the basin of an equilibrium."""

    passed: bool
    target: np.ndarray
    level: float
    stability: Stability
    component_size: int
    spacing: float
    touches_boundary: bool
    witnesses: np.ndarray
    far_witnesses: np.ndarray
    trajectories_total: int
    trajectories_converged: int
    failed_starts: list
    horizon: float
    reasons: list
    max_trajectory_g: float
    # properness of the dissipated quantity on the leaf is not decidable
    # numerically; the user's assertion is recorded, and without it a passing
    # certificate is only conditional
    proper_g_asserted: bool
    members: np.ndarray = field(repr=False)

    @property
    def verdict(self) -> str:
        if not self.passed:
            return "fail"
        return "pass" if self.proper_g_asserted else "conditional-pass"

    def as_report(self) -> dict:
        return {
            "passed": self.passed,
            "verdict": self.verdict,
            "properGAsserted": self.proper_g_asserted,
            "target": self.target.tolist(),
            "level": self.level,
            "stability": self.stability.value,
            "componentSize": self.component_size,
            "spacing": self.spacing,
            "touchesBoundary": self.touches_boundary,
            "witnesses": self.witnesses.tolist(),
            "farWitnesses": self.far_witnesses.tolist(),
            "trajectoriesTotal": self.trajectories_total,
            "trajectoriesConverged": self.trajectories_converged,
            "failedStarts": self.failed_starts,
            "horizon": self.horizon,
            "maxTrajectoryG": self.max_trajectory_g,
            "reasons": self.reasons,
        }


def basin_certify(system: DissipativeSystem, equilibrium, level: float,
                  sampler: SamplerConfig | None = None, *,
                  stability: Stability | None = None,
                  proper_g_asserted: bool = False,
                  target_radius: float = 1e-3,
                  converge_tol: float = 1e-4,
                  n_trajectories: int = 50,
                  horizon: float | None = None,
                  traj_seed: int = 7,
                  integrator: IntegratorConfig | None = None,
                  max_refine: int = 800,
                  susp_ratio: float = 0.05,
                  susp_g: float = 0.25) -> BasinCertificate:
    """Certify the sublevel component at ``level`` as basin evidence for an equilibrium.

    Raises :class:`NotAsymptoticallyStable` unless the equilibrium's
    leaf-restricted stability verdict is asymptotically stable (pass a
    precomputed verdict through ``stability`` to skip the sampling test), and
    :class:`AnchorOutsideLevel` when the level is below the equilibrium's own
    dissipated value.
    """
    x_e = as_point(equilibrium, system.dim)
    verdict = stability if stability is not None else stability_classify(system, x_e)
    if verdict is not Stability.ASYMPTOTICALLY_STABLE:
        raise NotAsymptoticallyStable(
            f"stability verdict is {verdict.value}; a basin certificate "
            "requires an asymptotically stable target")

    component = sublevel_component(system, x_e, level, sampler)
    witnesses = scan_invariant_witnesses(system, component, max_refine=max_refine,
                                         susp_ratio=susp_ratio, susp_g=susp_g)
    if witnesses.size:
        dists = np.linalg.norm(witnesses - x_e, axis=1)
        far = witnesses[dists > target_radius]
    else:
        far = np.zeros((0, system.dim))

    reasons = []
    if component.touches_boundary:
        reasons.append("component reaches the sampling box boundary, "
                       "containment unverified")
    if witnesses.size == 0:
        reasons.append("degeneracy-set scan found no witness at the target")
    if far.size:
        reasons.append("degeneracy-set witnesses found away from the target")

    rng = np.random.default_rng(traj_seed)
    members = component.members
    if len(members) > n_trajectories:
        starts = members[rng.choice(len(members), n_trajectories, replace=False)]
    else:
        starts = members

    def dist(p):
        return float(np.linalg.norm(p - x_e))

    t_end = horizon if horizon is not None else _auto_horizon(system, starts, dist)
    bound = float(np.linalg.norm(x_e)) + 10.0 * (
        (sampler.halfwidth if sampler and sampler.halfwidth else _auto_halfwidth(x_e)))
    converged, failures, g_max = _run_trajectories(system, starts, dist, t_end,
                                                   converge_tol, integrator, bound)
    if converged < len(starts):
        reasons.append("trajectories failed to converge to the target")
    run_cfg = integrator or IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10)
    if g_max > level + 10.0 * run_cfg.local_tol(abs(level)):
        reasons.append("a trajectory exited the sublevel set upward")

    return BasinCertificate(
        passed=not reasons,
        target=x_e,
        level=level,
        stability=verdict,
        component_size=len(members),
        spacing=component.spacing,
        touches_boundary=component.touches_boundary,
        witnesses=witnesses,
        far_witnesses=far,
        trajectories_total=len(starts),
        trajectories_converged=converged,
        failed_starts=failures,
        horizon=t_end,
        reasons=reasons,
        max_trajectory_g=float(g_max),
        proper_g_asserted=proper_g_asserted,
        members=members,
    )


def distance_to_orbit(point, orbit_states: np.ndarray) -> float:
    """Distance from a point to a densely sampled closed orbit.

    The nearest sample and its two cyclic neighbors define a quadratic
    parametric arc; the point is projected onto that arc by a 1d Newton
    iteration. The arc interpolates a smooth orbit to third order in the
    sample spacing, so the reported distance is far sharper than the
    nearest-sample distance.
    """
    p = np.asarray(point, dtype=float)
    d2 = np.sum((orbit_states - p) ** 2, axis=1)
    j = int(np.argmin(d2))
    m = len(d2)
    xm, x0, xp = orbit_states[(j - 1) % m], orbit_states[j], orbit_states[(j + 1) % m]
    a1 = 0.5 * (xp - xm)
    a2 = 0.5 * (xp - 2.0 * x0 + xm)

    s = 0.0
    for _ in range(20):
        arc = x0 + s * a1 + s * s * a2
        tangent = a1 + 2.0 * s * a2
        f = float((arc - p) @ tangent)
        fp = float(tangent @ tangent + 2.0 * ((arc - p) @ a2))
        if fp <= 0.0:
            break
        s_new = float(np.clip(s - f / fp, -1.5, 1.5))
        if abs(s_new - s) < 1e-12:
            s = s_new
            break
        s = s_new
    arc = x0 + s * a1 + s * s * a2
    return float(np.linalg.norm(arc - p))


def _flow_from(system, state, dt, cfg):
    if dt <= 0.0:
        return state
    tr = integrate(system, state, replace(cfg, t_end=dt), flow=Flow.PERTURBED,
                   checkpoints=np.array([dt]))
    return tr.checkpoint_states[-1]


def _detect_period(system, y0, cfg, t_search, coarse_tol, recur_tol):
    tr = integrate(system, y0, replace(cfg, t_end=t_search), flow=Flow.PERTURBED)
    d = np.linalg.norm(tr.states - y0, axis=1)
    left = False
    cand = None
    for i in range(1, len(d) - 1):
        if d[i] > coarse_tol:
            left = True
            continue
        if left and d[i] <= d[i - 1] and d[i] <= d[i + 1]:
            cand = i
            break
    if cand is None:
        raise NotPeriodic(
            f"no return within {coarse_tol:.3g} of the seed over [0, {t_search}]")

    # Newton on t -> <flow(t) - y0, rhs(flow(t))> = 0, re-integrating locally
    # from the recorded state just before the candidate time.
    base_i = cand - 1
    t_base = tr.times[base_i]
    x_base = tr.states[base_i]
    t_cur = tr.times[cand]
    h_loc = max(tr.times[cand] - tr.times[base_i], 1e-6)

    def gap(t):
        x = _flow_from(system, x_base, t - t_base, cfg)
        return float((x - y0) @ dissipated_rhs(system, x)), x

    x_cur = tr.states[cand]
    for _ in range(12):
        g0, x_cur = gap(t_cur)
        dt_fd = 1e-6 * max(1.0, abs(t_cur))
        g1, _ = gap(t_cur + dt_fd)
        slope = (g1 - g0) / dt_fd
        if slope == 0.0:
            break
        step = -g0 / slope
        step = float(np.clip(step, -h_loc, h_loc))
        t_cur = t_cur + step
        if abs(step) < 1e-13 * max(1.0, t_cur):
            break
    g0, x_cur = gap(t_cur)
    miss = float(np.linalg.norm(x_cur - y0))
    if miss > recur_tol:
        raise NotPeriodic(
            f"closest return misses the seed by {miss:.3g} "
            f"(required {recur_tol:.3g})")
    if t_cur <= 0.0:
        raise NotPeriodic("refined return time is not positive")
    return float(t_cur)


@dataclass(frozen=True)
class OrbitCertificate:
    """Evidence that a sublevel component is the basin of a periodic orbit."""

    passed: bool
    seed_state: np.ndarray
    period: float
    level: float
    orbit_in_invariant_set: bool
    max_det_full: float
    max_grad_g: float
    component_size: int
    spacing: float
    touches_boundary: bool
    witnesses: np.ndarray
    far_witnesses: np.ndarray
    coverage_gap: float
    covered: bool
    trajectories_total: int
    trajectories_converged: int
    failed_starts: list
    horizon: float
    reasons: list
    max_trajectory_g: float
    proper_g_asserted: bool
    phase_states: np.ndarray
    members: np.ndarray = field(repr=False)

    @property
    def verdict(self) -> str:
        if not self.passed:
            return "fail"
        return "pass" if self.proper_g_asserted else "conditional-pass"

    def as_report(self) -> dict:
        return {
            "passed": self.passed,
            "verdict": self.verdict,
            "properGAsserted": self.proper_g_asserted,
            "seed": self.seed_state.tolist(),
            "period": self.period,
            "level": self.level,
            "orbitInInvariantSet": self.orbit_in_invariant_set,
            "maxDetFull": self.max_det_full,
            "maxGradGNorm": self.max_grad_g,
            "componentSize": self.component_size,
            "spacing": self.spacing,
            "touchesBoundary": self.touches_boundary,
            "witnesses": self.witnesses.tolist(),
            "farWitnesses": self.far_witnesses.tolist(),
            "coverageGap": self.coverage_gap,
            "covered": self.covered,
            "trajectoriesTotal": self.trajectories_total,
            "trajectoriesConverged": self.trajectories_converged,
            "failedStarts": self.failed_starts,
            "horizon": self.horizon,
            "maxTrajectoryG": self.max_trajectory_g,
            "reasons": self.reasons,
        }


def periodic_orbit_certify(system: DissipativeSystem, seed_point, level: float,
                           sampler: SamplerConfig | None = None, *,
                           proper_g_asserted: bool = False,
                           seed_trust: float = 0.1,
                           recur_tol: float = 1e-8,
                           coarse_tol: float = 0.2,
                           t_search: float = 50.0,
                           n_phases: int = 100,
                           dense_states: int = 2048,
                           witness_tol: float = 1e-6,
                           coverage_factor: float = 2.0,
                           converge_tol: float = 1e-4,
                           n_trajectories: int = 50,
                           horizon: float | None = None,
                           traj_seed: int = 11,
                           integrator: IntegratorConfig | None = None,
                           max_refine: int = 800,
                           susp_ratio: float = 0.05,
                           susp_g: float = 0.25) -> OrbitCertificate:
    """Certify the sublevel component around a periodic orbit of the corrected flow.

    The seed is refined onto the degeneracy set, its period is recovered by
    recurrence detection plus a local Newton refinement of the return time,
    the orbit itself is re-classified at ``n_phases`` phases, and the
    component is then scanned and test-integrated exactly as for an
    equilibrium, with distances measured to the densely sampled orbit.
    """
    seed0 = as_point(seed_point, system.dim)
    cfg = integrator or IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12)
    y0 = refine_to_invariant_set(system, seed0, trust_radius=seed_trust,
                                 tol_inv=1e-12, tol_g=1e-8)
    if y0 is None:
        # run recurrence detection on the raw seed anyway so the error names
        # the actual obstruction: a strictly dissipating start is NotPeriodic,
        # while a recurrent one merely failed the degeneracy refinement
        _detect_period(system, seed0, cfg, t_search, coarse_tol, recur_tol)
        raise NotOnInvariantSet(
            "seed does not refine onto the degeneracy set within "
            f"{seed_trust:.3g} of {seed0.tolist()}")

    period = _detect_period(system, y0, cfg, t_search, coarse_tol, recur_tol)

    cps = np.linspace(0.0, period, dense_states, endpoint=False)[1:]
    tr = integrate(system, y0, replace(cfg, t_end=period), flow=Flow.PERTURBED,
                   checkpoints=cps)
    orbit_states = np.vstack([y0[None, :], tr.checkpoint_states])

    phase_idx = (np.arange(n_phases) * len(orbit_states)) // n_phases
    phase_states = orbit_states[phase_idx]
    max_det = 0.0
    max_g = 0.0
    on_inv = True
    for p in phase_states:
        cls = classify_point(system, p, tol_inv=1e-12, tol_g=1e-8)
        max_det = max(max_det, cls.det_full)
        max_g = max(max_g, cls.grad_g_norm)
        if not cls.in_invariant_set:
            on_inv = False

    component = sublevel_component(system, y0, level, sampler)
    witnesses = scan_invariant_witnesses(system, component, max_refine=max_refine,
                                         susp_ratio=susp_ratio, susp_g=susp_g)

    def dist(p):
        return distance_to_orbit(p, orbit_states)

    if witnesses.size:
        wdists = np.array([dist(w) for w in witnesses])
        far = witnesses[wdists > witness_tol]
        near = witnesses[wdists <= witness_tol]
    else:
        far = np.zeros((0, system.dim))
        near = witnesses

    if near.size:
        gap = max(float(np.min(np.linalg.norm(near - p, axis=1)))
                  for p in phase_states)
    else:
        gap = np.inf
    covered = gap <= coverage_factor * component.spacing

    reasons = []
    if not on_inv:
        reasons.append("orbit phases leave the degeneracy set at tight tolerance")
    if component.touches_boundary:
        reasons.append("component reaches the sampling box boundary, "
                       "containment unverified")
    if far.size:
        reasons.append("degeneracy-set witnesses found away from the orbit")
    if not covered:
        reasons.append("witnesses do not cover the orbit")

    rng = np.random.default_rng(traj_seed)
    members = component.members
    if len(members) > n_trajectories:
        starts = members[rng.choice(len(members), n_trajectories, replace=False)]
    else:
        starts = members
    t_end = horizon if horizon is not None else _auto_horizon(system, starts, dist)
    bound = float(np.max(np.linalg.norm(orbit_states, axis=1))) + 10.0 * (
        (sampler.halfwidth if sampler and sampler.halfwidth else _auto_halfwidth(y0)))
    converged, failures, g_max = _run_trajectories(system, starts, dist, t_end,
                                                   converge_tol, integrator, bound)
    if converged < len(starts):
        reasons.append("trajectories failed to converge to the orbit")
    run_cfg = integrator or IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10)
    if g_max > level + 10.0 * run_cfg.local_tol(abs(level)):
        reasons.append("a trajectory exited the sublevel set upward")

    return OrbitCertificate(
        passed=not reasons,
        seed_state=y0,
        period=period,
        level=level,
        orbit_in_invariant_set=on_inv,
        max_det_full=max_det,
        max_grad_g=max_g,
        component_size=len(members),
        spacing=component.spacing,
        touches_boundary=component.touches_boundary,
        witnesses=witnesses,
        far_witnesses=far,
        coverage_gap=float(gap),
        covered=covered,
        trajectories_total=len(starts),
        trajectories_converged=converged,
        failed_starts=failures,
        horizon=t_end,
        reasons=reasons,
        max_trajectory_g=float(g_max),
        proper_g_asserted=proper_g_asserted,
        phase_states=phase_states,
        members=members,
    )


def threshold_search(system: DissipativeSystem, equilibrium, level_max: float,
                     steps: int = 8,
                     sampler: SamplerConfig | None = None,
                     **certify_kwargs):
    """Bisection for the largest certifiable sublevel for an equilibrium.

    Returns ``(level, history)`` where history lists ``(level, passed)``
    pairs in evaluation order. Raises :class:`NoValidLevel` when no probed
    level certifies.
    """
    x_e = as_point(equilibrium, system.dim)
    g_e = float(system.dissipated(x_e))
    if not level_max > g_e:
        raise NoValidLevel(
            f"level_max {level_max:.6g} does not exceed the equilibrium "
            f"value {g_e:.6g}")
    certify_kwargs.setdefault(
        "stability", stability_classify(system, x_e))

    history = []

    def passes(level):
        try:
            cert = basin_certify(system, x_e, level, sampler, **certify_kwargs)
        except AnchorOutsideLevel:
            return False
        history.append((level, cert.passed))
        return cert.passed

    if passes(level_max):
        return level_max, history
    lo, hi = g_e, level_max
    lo_passed = False
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if passes(mid):
            lo, lo_passed = mid, True
        else:
            hi = mid
    if not lo_passed:
        raise NoValidLevel(
            f"no level in ({g_e:.6g}, {level_max:.6g}] certifies "
            f"after {steps} bisection steps")
    return lo, history
