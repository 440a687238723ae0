"""Fixed and adaptive Runge-Kutta integration with structure diagnostics.

Both the conservative flow and the corrected (dissipative) flow integrate
through the same machinery. Along the way the integrator records the conserved
values, the dissipated value, the full Gram determinant, the control-field
norm, and per accepted step a midpoint consistency check between the measured
finite-difference rate of the dissipated quantity and its predicted rate.

Trajectories never get silently re-projected onto a leaf; an optional Newton
re-projection after each accepted step can be switched on in the config, and
leaf drift is always visible in the recorded conserved values.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .control import _cofactor_from_frame
from .errors import (
    MaxStepsExceeded,
    NonFiniteState,
    NonFiniteValue,
    NotOnInvariantSet,
    StepUnderflow,
    UnboundedTrajectory,
)
from .fields import DissipativeSystem, as_point
from .gram import system_frame


def _guard_nonfinite(fn):
    """Report mid-run non-finite field values as integration failures.

    A state can pass the finiteness check while its differentials or Gram
    data overflow; once integration has started that is a trajectory leaving
    the representable domain, not a defect of the field definitions.
    """
    def wrapped(*args):
        try:
            return fn(*args)
        except NonFiniteValue as exc:
            raise NonFiniteState(str(exc)) from exc
    return wrapped

# Dormand-Prince 5(4): 7 stages, FSAL, fifth-order propagation with a
# fourth-order error estimate.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])
_DP_ERR = _DP_B5 - _DP_B4

# Step controller constants: safety 0.9, growth capped at 5x, shrink floored
# at 0.2x, with the usual PI stabilization exponent.
_SAFETY = 0.9
_FAC_MAX = 5.0
_FAC_MIN = 0.2
_PI_BETA = 0.04
_ERR_EXPO = 0.2 - 0.75 * _PI_BETA

# Constants of the per-step midpoint consistency band: a quadratic-in-h
# discretization term plus the local-error contamination of the finite
# difference.
_RATE_CURVE_FACTOR = 5.0
_RATE_NOISE_FACTOR = 10.0


class Flow(Enum):
    PERTURBED = "perturbed"
    UNPERTURBED = "unperturbed"


class Method(Enum):
    RK4_FIXED = "rk4"
    RK45_ADAPTIVE = "rk45"


@dataclass(frozen=True)
class IntegratorConfig:
    method: Method = Method.RK45_ADAPTIVE
    h0: float = 0.01
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    t_end: float = 10.0
    max_steps: int = 1_000_000
    record_every: int = 1
    leaf_reprojection: bool = False

    def local_tol(self, state_norm: float) -> float:
        return self.abs_tol + self.rel_tol * state_norm


@dataclass
class Trajectory:
    """Recorded states and structure diagnostics of one integration."""

    flow: Flow
    config: IntegratorConfig
    times: np.ndarray
    states: np.ndarray
    conserved_values: np.ndarray   # (records, k)
    dissipated_values: np.ndarray  # (records,)
    det_full: np.ndarray
    control_norm: np.ndarray
    step_sizes: np.ndarray
    # per accepted step (corrected flow only): midpoint rate consistency data
    rate_times: np.ndarray
    rate_measured: np.ndarray
    rate_predicted: np.ndarray
    rate_band: np.ndarray
    checkpoint_times: np.ndarray | None = None
    checkpoint_states: np.ndarray | None = None
    n_accepted: int = 0
    n_rejected: int = 0

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def conservation_drift(self) -> float:
        """Max deviation of any conserved value from its initial value."""
        if self.conserved_values.shape[1] == 0:
            return 0.0
        return float(np.max(np.abs(self.conserved_values - self.conserved_values[0])))

    def monotonicity_band(self) -> float:
        """Allowed uphill wiggle of the dissipated value between records."""
        gmax = float(np.max(np.abs(self.dissipated_values)))
        return 10.0 * self.config.local_tol(gmax)

    def monotonicity_violation(self) -> float:
        """Largest recorded uphill move of G beyond the tolerance band (<= 0 is clean)."""
        diffs = np.diff(self.dissipated_values)
        if diffs.size == 0:
            return -np.inf
        return float(np.max(diffs) - self.monotonicity_band())

    def rate_check_violation(self) -> float:
        """Worst excess of |measured - predicted| rate over its band (<= 0 is clean)."""
        if self.rate_measured.size == 0:
            return -np.inf
        gap = np.abs(self.rate_measured - self.rate_predicted) - self.rate_band
        return float(np.max(gap))

    def to_csv(self, fh) -> None:
        """Write records as CSV with 17 significant digits."""
        k = self.conserved_values.shape[1]
        n = self.states.shape[1]
        cols = (["t"] + [f"x{i + 1}" for i in range(n)]
                + [f"F{i + 1}" for i in range(k)]
                + ["G", "detSigmaFull", "v0norm", "h"])
        fh.write(",".join(cols) + "\n")
        for j in range(self.times.size):
            row = [self.times[j], *self.states[j], *self.conserved_values[j],
                   self.dissipated_values[j], self.det_full[j],
                   self.control_norm[j], self.step_sizes[j]]
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


class _Recorder:
    def __init__(self, system: DissipativeSystem):
        self.system = system
        self.times = []
        self.states = []
        self.f_vals = []
        self.g_vals = []
        self.dets = []
        self.v0n = []
        self.hs = []

    def add(self, t: float, x: np.ndarray, h: float):
        fr = _guard_nonfinite(system_frame)(self.system, x)
        v0 = _cofactor_from_frame(fr)
        self.times.append(t)
        self.states.append(x.copy())
        self.f_vals.append([f(x) for f in self.system.conserved])
        self.g_vals.append(self.system.dissipated(x))
        self.dets.append(fr.det_full())
        self.v0n.append(float(np.sqrt(max(v0 @ fr.gmat @ v0, 0.0))))
        self.hs.append(h)


def _rk4_step(rhs, x, h):
    k1 = rhs(x)
    k2 = rhs(x + 0.5 * h * k1)
    k3 = rhs(x + 0.5 * h * k2)
    k4 = rhs(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _project_to_leaf_values(system, x, target, tol=1e-12, max_iter=20):
    """Minimum-norm Newton correction back onto the conserved level set."""
    y = x.copy()
    for _ in range(max_iter):
        res = system.leaf_value(y) - target
        if np.max(np.abs(res)) <= tol:
            return y
        jac = np.vstack([f.d(y) for f in system.conserved])
        lam = np.linalg.lstsq(jac @ jac.T, -res, rcond=None)[0]
        y = y + jac.T @ lam
    return y


def integrate(system: DissipativeSystem, x0, config: IntegratorConfig,
              flow: Flow = Flow.PERTURBED,
              checkpoints=None, bound: float | None = None) -> "Trajectory":
    """Integrate either flow from x0 up to t_end.

    ``checkpoints`` forces steps to land exactly on the given times and stores
    the states there (used for flow comparison and limit-set probes).
    ``bound`` aborts with :class:`UnboundedTrajectory` when the state norm
    exceeds it.
    """
    x = as_point(x0, system.dim)
    if config.t_end <= 0:
        raise ValueError("t_end must be positive")

    if flow is Flow.PERTURBED:
        def rhs(p):
            fr = system_frame(system, p)
            return system.X(p) - _cofactor_from_frame(fr)
    else:
        def rhs(p):
            return system.X(p)
    rhs = _guard_nonfinite(rhs)

    cps = None
    cp_states = None
    next_cp = None
    if checkpoints is not None:
        cps = np.asarray(checkpoints, dtype=float)
        if cps.ndim != 1 or np.any(np.diff(cps) <= 0):
            raise ValueError("checkpoints must be strictly increasing")
        if cps[0] < 0 or cps[-1] > config.t_end + 1e-12:
            raise ValueError("checkpoints must lie within [0, t_end]")
        cp_states = np.empty((cps.size, system.dim))
        next_cp = 0

    rec = _Recorder(system)
    g_field = system.dissipated
    leaf_target = system.leaf_value(x) if system.k else None

    rate_t, rate_m, rate_p, rate_band = [], [], [], []
    t = 0.0
    h = min(config.h0, config.t_end)
    h_ctrl = h
    fac_old = 1e-4
    n_acc = 0
    n_rej = 0
    adaptive = config.method is Method.RK45_ADAPTIVE
    k_first = rhs(x)  # FSAL seed
    g_prev = g_field(x)

    rec.add(0.0, x, 0.0)
    if next_cp is not None and cps[next_cp] == 0.0:
        cp_states[next_cp] = x
        next_cp = next_cp + 1 if next_cp + 1 < cps.size else None

    min_h = 1e-14 * config.t_end
    steps_since_record = 0

    while t < config.t_end - 1e-14 * config.t_end:
        if n_acc + n_rej >= config.max_steps:
            raise MaxStepsExceeded(
                f"exceeded {config.max_steps} steps at t={t:.6g} of {config.t_end:.6g}"
            )
        if adaptive and h_ctrl < min_h:
            raise StepUnderflow(f"step size {h_ctrl:.3e} below floor at t={t:.6g}")
        h_try = h_ctrl if adaptive else config.h0
        h_try = min(h_try, config.t_end - t)
        clipped = False
        if next_cp is not None and t + h_try > cps[next_cp] - 1e-14:
            h_try = cps[next_cp] - t
            clipped = True

        if adaptive:
            stages = np.empty((7, x.size))
            stages[0] = k_first
            for s in range(1, 7):
                xs = x + h_try * (_DP_A[s] @ stages[:s])
                stages[s] = rhs(xs)
            x_new = x + h_try * (_DP_B5 @ stages)
            err_vec = h_try * (_DP_ERR @ stages)
            scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(x), np.abs(x_new))
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
            if not np.isfinite(err):
                raise NonFiniteState(f"non-finite error estimate at t={t:.6g}")
            if err > 1.0:
                n_rej += 1
                fac = max(_FAC_MIN, _SAFETY / err ** _ERR_EXPO)
                h_ctrl = h_try * fac
                continue
            if err == 0.0:
                fac = _FAC_MAX  # exactly stationary state, grow freely
            else:
                fac = _SAFETY * err ** (-_ERR_EXPO) * fac_old ** _PI_BETA
            fac = min(_FAC_MAX, max(_FAC_MIN, fac))
            if not clipped:
                h_ctrl = h_try * fac
            else:
                h_ctrl = max(h_ctrl, h_try * fac)
            fac_old = max(err, 1e-4)
            k_next_first = stages[6]  # FSAL: rhs at (t+h, x_new)
        else:
            x_new = _rk4_step(rhs, x, h_try)
            k_next_first = None

        if not np.all(np.isfinite(x_new)):
            raise NonFiniteState(f"state became non-finite at t={t + h_try:.6g}")
        if bound is not None and float(np.linalg.norm(x_new)) > bound:
            raise UnboundedTrajectory(
                f"state norm exceeded {bound:.3e} at t={t + h_try:.6g}"
            )

        if config.leaf_reprojection and leaf_target is not None:
            x_new = _project_to_leaf_values(system, x_new, leaf_target)
            k_next_first = None

        g_new = g_field(x_new)
        if flow is Flow.PERTURBED:
            mid = 0.5 * (x + x_new)
            fr_mid = _guard_nonfinite(system_frame)(system, mid)
            predicted = -fr_mid.det_full()
            measured = (g_new - g_prev) / h_try
            scale_rate = max(1.0, abs(measured), abs(predicted))
            noise = (_RATE_NOISE_FACTOR
                     * float(np.linalg.norm(fr_mid.diffs[fr_mid.k]))
                     * config.local_tol(float(np.linalg.norm(x))) / h_try)
            band = _RATE_CURVE_FACTOR * h_try ** 2 * scale_rate + noise
            rate_t.append(t + 0.5 * h_try)
            rate_m.append(measured)
            rate_p.append(predicted)
            rate_band.append(band)

        t += h_try
        x = x_new
        g_prev = g_new
        if k_next_first is not None:
            k_first = k_next_first
        else:
            k_first = rhs(x)
        n_acc += 1
        steps_since_record += 1

        at_cp = next_cp is not None and abs(t - cps[next_cp]) <= 1e-12 * max(1.0, t)
        if at_cp:
            cp_states[next_cp] = x
            next_cp = next_cp + 1 if next_cp + 1 < cps.size else None
        final = t >= config.t_end - 1e-14 * config.t_end
        if steps_since_record >= config.record_every or final:
            rec.add(t, x, h_try)
            steps_since_record = 0

    return Trajectory(
        flow=flow,
        config=config,
        times=np.array(rec.times),
        states=np.array(rec.states),
        conserved_values=np.array(rec.f_vals).reshape(len(rec.times), system.k),
        dissipated_values=np.array(rec.g_vals),
        det_full=np.array(rec.dets),
        control_norm=np.array(rec.v0n),
        step_sizes=np.array(rec.hs),
        rate_times=np.array(rate_t),
        rate_measured=np.array(rate_m),
        rate_predicted=np.array(rate_p),
        rate_band=np.array(rate_band),
        checkpoint_times=cps,
        checkpoint_states=cp_states,
        n_accepted=n_acc,
        n_rejected=n_rej,
    )


def compare_on_invariant_set(system: DissipativeSystem, x0,
                             config: IntegratorConfig,
                             n_checkpoints: int = 101,
                             tol_inv: float = 1e-9,
                             tol_g: float = 1e-6) -> float:
    """Max distance between the two flows started at a degeneracy-set point.

    On the set where the stacked gradients lose rank the control field
    vanishes, so both flows must coincide; the returned number is the max
    chart distance over a shared checkpoint grid. Raises
    :class:`NotOnInvariantSet` when x0 classifies as generic.
    """
    from .structure import PointKind, classify_point

    cls = classify_point(system, x0, tol_inv=tol_inv, tol_g=tol_g)
    if cls.kind is PointKind.GENERIC:
        raise NotOnInvariantSet(
            f"point {np.asarray(x0).tolist()} classifies as generic "
            f"(detFull={cls.det_full:.3e}, scale={cls.scale:.3e})"
        )
    cps = np.linspace(0.0, config.t_end, n_checkpoints)[1:]
    tr_p = integrate(system, x0, config, flow=Flow.PERTURBED, checkpoints=cps)
    tr_u = integrate(system, x0, config, flow=Flow.UNPERTURBED, checkpoints=cps)
    gaps = np.linalg.norm(tr_p.checkpoint_states - tr_u.checkpoint_states, axis=1)
    return float(np.max(gaps))


def flow_agreement_band(config: IntegratorConfig, state_norm: float) -> float:
    """Allowed flow disagreement for comparisons: 10x the accumulated local tolerance."""
    return 10.0 * config.local_tol(state_norm) * config.t_end
