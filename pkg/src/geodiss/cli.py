"""Command line front end.

Four subcommands share one calling convention: a JSON config validated
against the packaged schema (unknown keys are rejected with the offending
key named), an optional ``--out`` directory that the invocation owns and
fills atomically, ``--seed`` to override the config's seed, and
``--threads`` to cap linear-algebra thread pools before the numerical core
loads. The primary JSON report always goes to stdout; files are written
only when ``--out`` is given (simulate: trajectory.csv and summary.json,
verify: verify.json, equilibria: equilibria.json, basin: basin.json plus
members.csv on request).

Exit codes (the full set; argparse failures are remapped to 1):
  0  success (including a conditional pass of a certificate)
  1  configuration problem: unreadable config, schema violation, bad system
  2  integration failure: step underflow, step budget, non-finite or
     unbounded state
  3  identity violation: a structural identity, metric positivity, or
     differential consistency check failed
  4  certificate failure: a basin or orbit certificate did not hold, or its
     preconditions (stability, level, periodicity) were not met

This module deliberately avoids importing the numerical core at module
scope so that ``--threads`` can still influence BLAS pool sizes.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

from .errors import (
    AnchorOutsideLevel,
    BadInertia,
    ConfigError,
    DimensionMismatch,
    LeafProjectionFailure,
    MaxStepsExceeded,
    NoConvergence,
    NonFiniteState,
    NonFiniteValue,
    NonPositiveDefiniteMetric,
    NotAsymptoticallyStable,
    NotOnInvariantSet,
    NotPeriodic,
    NoValidLevel,
    SingularLeaf,
    StepUnderflow,
    UnboundedTrajectory,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INTEGRATION = 2
EXIT_IDENTITY = 3
EXIT_CERTIFICATE = 4

_THREAD_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)


class _Parser(argparse.ArgumentParser):
    """Argument errors are configuration errors; exit 2 is reserved for
    integration failures."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="geodiss",
        description="Gram-determinant control fields: simulation, structure "
                    "verification, equilibrium search, basin certificates.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)
    specs = [
        ("simulate", "integrate the corrected or the conservative flow, "
                     "writing a CSV trajectory"),
        ("verify", "check structural identities and derivative consistency "
                   "at sample points"),
        ("equilibria", "locate corrected-flow equilibria and classify them"),
        ("basin", "build a sublevel-set basin certificate for an "
                  "equilibrium or a periodic orbit"),
    ]
    for name, help_text in specs:
        q = sub.add_parser(name, help=help_text)
        q.add_argument("--config", required=True, metavar="PATH",
                       help="JSON config (see docs/config_schema.json)")
        q.add_argument("--out", default=None, metavar="DIR",
                       help="output directory owned by this invocation; "
                            "reports also go to stdout")
        q.add_argument("--seed", type=int, default=None,
                       help="override the seed in the config")
        q.add_argument("--threads", type=int, default=None,
                       help="cap linear-algebra thread pools")
    return parser


def _cap_threads(n: int) -> None:
    for var in _THREAD_ENV_VARS:
        os.environ[var] = str(n)


def _load_schema() -> dict:
    with resources.files("geodiss").joinpath("config_schema.json").open() as fh:
        return json.load(fh)


def _load_config(path: str, command: str) -> dict:
    try:
        with open(path) as fh:
            config = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc

    import jsonschema

    schema_doc = _load_schema()
    schema = dict(schema_doc[command])
    schema["$defs"] = schema_doc["$defs"]
    try:
        jsonschema.validate(config, schema)
    except jsonschema.ValidationError as exc:
        where = exc.json_path if exc.json_path != "$" else "top level"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc
    return config


def _build_system(spec, corrupt: bool = False):
    """Resolve a config 'system' entry to (system, identity_only, name)."""
    import numpy as np

    from .fields import DissipativeSystem, MetricField, ScalarField, VectorField

    if isinstance(spec, str):
        from .catalog import from_name
        entry = from_name(spec)
        system, identity_only, name = entry.system, entry.identity_only, entry.name
    else:
        from .poly import Polynomial
        dim = spec["dim"]

        def poly_field(pd, label):
            for t in pd["terms"]:
                if len(t["powers"]) != dim:
                    raise ConfigError(
                        f"polynomial term for '{label}' has "
                        f"{len(t['powers'])} exponents, expected {dim}")
            p = Polynomial.from_terms(dim, [(t["coef"], t["powers"])
                                            for t in pd["terms"]])
            return p

        conserved = []
        for i, pd in enumerate(spec.get("conserved", [])):
            p = poly_field(pd, f"f{i + 1}")
            conserved.append(ScalarField(dim, p.value, p.diff, label=f"f{i + 1}"))
        gp = poly_field(spec["dissipated"], "g")
        dissipated = ScalarField(dim, gp.value, gp.diff, label="g")

        fspec = spec.get("field", "zero")
        if fspec == "zero":
            X = VectorField(dim, lambda x: np.zeros(dim), label="zero")
        else:
            if len(fspec) != dim:
                raise ConfigError(
                    f"'field' lists {len(fspec)} components, expected {dim}")
            comps = [poly_field(pd, f"X{j + 1}") for j, pd in enumerate(fspec)]
            X = VectorField(
                dim, lambda x, _c=comps: np.array([p.value(x) for p in _c]),
                label="poly")

        mspec = spec.get("metric", "euclidean")
        if mspec == "euclidean":
            metric = MetricField.euclidean(dim)
        else:
            mat = np.asarray(mspec, dtype=float)
            if mat.shape != (dim, dim):
                raise ConfigError(
                    f"'metric' has shape {list(mat.shape)}, expected "
                    f"[{dim}, {dim}]")
            metric = MetricField.constant(mat)

        system = DissipativeSystem(X=X, conserved=tuple(conserved),
                                   dissipated=dissipated, metric=metric)
        identity_only, name = False, "inline"

    if corrupt:
        # test hook: shift the dissipated differential away from the value,
        # which the derivative consistency check must flag
        orig = system.dissipated
        bad = ScalarField(orig.dim, orig.value,
                          lambda x, _o=orig: _o.d(x) + 1e-3,
                          label=orig.label + "(corrupted)")
        system = DissipativeSystem(X=system.X, conserved=system.conserved,
                                   dissipated=bad, metric=system.metric)
    return system, identity_only, name


def _out_dir(args) -> str | None:
    if args.out is None:
        return None
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _emit(obj, args, filename: str) -> None:
    """Primary report to stdout, plus a file of the given name under --out."""
    from .report import json_text, write_text_atomic
    text = json_text(obj)
    out = _out_dir(args)
    if out:
        write_text_atomic(text, os.path.join(out, filename))
    sys.stdout.write(text)


def _points_csv(points) -> str:
    from .report import FLOAT_FORMAT
    lines = [",".join(f"x{i + 1}" for i in range(points.shape[1]))]
    for row in points:
        lines.append(",".join(FLOAT_FORMAT % v for v in row))
    return "\n".join(lines) + "\n"


def _pick_seed(config: dict, args, default: int = 0) -> int:
    if args.seed is not None:
        return args.seed
    return int(config.get("seed", default))


def _integrator_config(spec: dict | None):
    from .integrators import IntegratorConfig, Method
    if not spec:
        return IntegratorConfig()
    kwargs = dict(spec)
    if "method" in kwargs:
        kwargs["method"] = Method(kwargs["method"])
    return IntegratorConfig(**kwargs)


def cmd_simulate(config: dict, args) -> int:
    import numpy as np

    from .integrators import Flow, integrate
    from .report import write_text_atomic
    from .structure import classify_point

    system, _, _ = _build_system(config["system"])
    x0 = np.asarray(config["x0"], dtype=float)
    if x0.shape != (system.dim,):
        raise ConfigError(f"x0 has {x0.size} components, expected {system.dim}")
    cfg = _integrator_config(config.get("integrator"))
    flow = Flow(config.get("flow", "perturbed"))
    checkpoints = config.get("checkpoints")
    if checkpoints is not None:
        checkpoints = np.sort(np.asarray(checkpoints, dtype=float))
    tr = integrate(system, x0, cfg, flow=flow, checkpoints=checkpoints,
                   bound=config.get("bound"))

    summary = {
        "flow": flow.value,
        "finalTime": float(tr.times[-1]),
        "finalState": tr.final_state.tolist(),
        "conservationDrift": tr.conservation_drift(),
        "monotone": tr.monotonicity_violation() <= 0.0,
        "monotonicityViolation": tr.monotonicity_violation(),
        "rateCheckViolation": tr.rate_check_violation(),
        "finalClassification": classify_point(system, tr.final_state).as_report(),
        "accepted": tr.n_accepted,
        "rejected": tr.n_rejected,
    }
    out = _out_dir(args)
    if out:
        write_text_atomic(tr.csv_text(), os.path.join(out, "trajectory.csv"))
    _emit(summary, args, "summary.json")
    return EXIT_OK


def cmd_verify(config: dict, args) -> int:
    import numpy as np

    from .control import Formulation, control_field, identity_scales, tensor_matrix
    from .fields import central_difference
    from .gram import system_frame

    system, identity_only, name = _build_system(
        config["system"], corrupt=config.get("corrupt_differential", False))

    if "points" in config:
        points = [np.asarray(p, dtype=float) for p in config["points"]]
        for p in points:
            if p.shape != (system.dim,):
                raise ConfigError(
                    f"sample point has {p.size} components, expected {system.dim}")
    else:
        rng = np.random.default_rng(_pick_seed(config, args))
        box = float(config.get("box", 1.5))
        n = int(config.get("n_probes", 25))
        points = list(rng.uniform(-box, box, size=(n, system.dim)))

    factor = float(config.get("identity_factor", 1e-9))
    gram_floor = float(config.get("gram_floor", 1e-10))
    cons_tol = float(config.get("conservation_tol", 1e-9))
    sym_tol = float(config.get("tensor_symmetry_tol", 1e-12))
    fd_tol = 1e-5
    formulations = [Formulation(f) for f in
                    config.get("formulations",
                               ["cofactor", "tensor", "projection"])]

    fd_max = 0.0
    fd_skipped = sorted({f.label or "(unnamed)" for f in system.all_fields()
                         if f.differential is None})
    cons_max = 0.0
    agree_max = 0.0
    tangency_max = 0.0
    pairing_max = 0.0
    sym_max = 0.0
    gram_min = 0.0
    metric_failures = []
    projection_skipped = 0

    for p in points:
        try:
            system.metric.at(p)
        except NonPositiveDefiniteMetric:
            metric_failures.append(p.tolist())
            continue

        for f in system.all_fields():
            if f.differential is None:
                continue
            analytic = f.d(p)
            fd = central_difference(f.value, p)
            gap = float(np.max(np.abs(analytic - fd)))
            fd_max = max(fd_max, gap / (1.0 + float(np.max(np.abs(analytic)))))

        if not identity_only:
            xv = system.X(p)
            for f in system.conserved:
                r = abs(float(f.d(p) @ xv))
                cons_max = max(cons_max, r / (1.0 + float(
                    np.linalg.norm(f.d(p)) * np.linalg.norm(xv))))

        fr = system_frame(system, p)
        scales = identity_scales(fr)
        evals = []
        for form in formulations:
            try:
                evals.append(control_field(system, p, form))
            except SingularLeaf:
                projection_skipped += 1
        if len(evals) >= 2:
            denom = max(scales["control"], 1e-300)
            for a in range(len(evals)):
                for b in range(a + 1, len(evals)):
                    gap = float(np.max(np.abs(evals[a].v0 - evals[b].v0)))
                    agree_max = max(agree_max, gap / denom)
        if evals:
            v0 = evals[0].v0
            for i in range(system.k):
                denom = max(scales["tangency"][i], 1e-300)
                tangency_max = max(
                    tangency_max, abs(float(fr.diffs[i] @ v0)) / denom)
            denom = max(scales["dissipation"], 1e-300)
            pairing_max = max(
                pairing_max,
                abs(float(fr.diffs[system.k] @ v0) - fr.det_full()) / denom)
        tmat = tensor_matrix(system, p)
        denom = max(float(np.max(np.abs(tmat))), 1e-300)
        sym_max = max(sym_max, float(np.max(np.abs(tmat - tmat.T))) / denom)
        eigs = np.linalg.eigvalsh(fr.gram)
        denom = max(fr.classification_scale(), 1e-300)
        gram_min = min(gram_min, float(eigs[0]) / denom)

    checks = {
        "differentialConsistency": {
            "max": fd_max, "tol": fd_tol, "passed": fd_max <= fd_tol,
            "skippedFields": fd_skipped},
        "conservation": {
            "max": cons_max, "tol": cons_tol,
            "passed": identity_only or cons_max <= cons_tol,
            "skipped": bool(identity_only or system.k == 0)},
        "formulationAgreement": {
            "max": agree_max, "tol": factor, "passed": agree_max <= factor,
            "projectionSkipped": projection_skipped},
        "tangency": {
            "max": tangency_max, "tol": factor,
            "passed": tangency_max <= factor},
        "dissipationPairing": {
            "max": pairing_max, "tol": factor,
            "passed": pairing_max <= factor},
        "tensorSymmetry": {
            "max": sym_max, "tol": sym_tol,
            "passed": sym_max <= sym_tol},
        "gramFloor": {
            "min": gram_min, "floor": -gram_floor,
            "passed": gram_min >= -gram_floor},
        "metricPositive": {
            "failures": metric_failures, "passed": not metric_failures},
    }
    violations = sorted(k for k, v in checks.items() if not v["passed"])

    _emit({
        "system": name,
        "pointCount": len(points),
        "status": "fail" if violations else "pass",
        "violations": violations,
        "checks": checks,
    }, args, "verify.json")
    return EXIT_IDENTITY if violations else EXIT_OK


def cmd_equilibria(config: dict, args) -> int:
    from dataclasses import replace

    import numpy as np

    from .structure import find_equilibria, stability_classify

    system, _, name = _build_system(config["system"])
    if "seeds" in config:
        seeds = [np.asarray(s, dtype=float) for s in config["seeds"]]
        for s in seeds:
            if s.shape != (system.dim,):
                raise ConfigError(
                    f"seed has {s.size} components, expected {system.dim}")
    else:
        rng = np.random.default_rng(_pick_seed(config, args))
        box = float(config.get("box", 1.5))
        n = int(config.get("n_seeds", 64))
        seeds = list(rng.uniform(-box, box, size=(n, system.dim)))

    kwargs = {}
    for key in ("newton_tol", "dedup_tol", "tol_inv", "tol_g"):
        if key in config:
            kwargs[key] = config[key]
    reports, unresolved = find_equilibria(system, seeds, **kwargs)

    if config.get("stability", True):
        st_kwargs = {}
        if "stability_samples" in config:
            st_kwargs["leaf_samples"] = config["stability_samples"]
        if "stability_radius" in config:
            st_kwargs["radius"] = config["stability_radius"]
        reports = [replace(r, stability=stability_classify(
            system, r.location, **st_kwargs)) for r in reports]

    _emit({
        "system": name,
        "seedCount": len(seeds),
        "count": len(reports),
        "equilibria": [r.as_report() for r in reports],
        "unresolvedSeeds": [s.tolist() for s in unresolved],
    }, args, "equilibria.json")
    return EXIT_OK


def cmd_basin(config: dict, args) -> int:
    from dataclasses import replace as dc_replace

    from .basin import (
        SamplerConfig,
        basin_certify,
        periodic_orbit_certify,
        threshold_search,
    )

    system, _, name = _build_system(config["system"])
    target = config.get("target")
    orbit_seed = config.get("orbit_seed")
    if (target is None) == (orbit_seed is None):
        raise ConfigError("exactly one of 'target' and 'orbit_seed' is required")
    threshold = config.get("threshold")
    level = config.get("level")
    if threshold is not None and orbit_seed is not None:
        raise ConfigError("'threshold' search applies to equilibrium targets only")
    if (threshold is None) == (level is None):
        raise ConfigError("exactly one of 'level' and 'threshold' is required")

    dump_members = bool(config.get("dump_members", False))
    if dump_members and args.out is None:
        raise ConfigError("'dump_members' needs --out to receive members.csv")

    sampler = SamplerConfig(**config.get("sampler", {}))
    if args.seed is not None:
        sampler = dc_replace(sampler, seed=args.seed)
    seed = _pick_seed(config, args, default=7)

    common = {"traj_seed": seed,
              "proper_g_asserted": bool(config.get("proper_G_asserted", False))}
    for key in ("converge_tol", "n_trajectories", "horizon", "max_refine",
                "susp_ratio", "susp_g"):
        if key in config:
            common[key] = config[key]
    if "integrator" in config:
        common["integrator"] = _integrator_config(config["integrator"])

    if threshold is not None:
        eq_kwargs = dict(common)
        if "target_radius" in config:
            eq_kwargs["target_radius"] = config["target_radius"]
        found, history = threshold_search(
            system, target, threshold["level_max"],
            steps=threshold.get("steps", 8), sampler=sampler, **eq_kwargs)
        _emit({
            "system": name,
            "mode": "threshold",
            "target": target,
            "level": found,
            "levelMax": threshold["level_max"],
            "history": [[lvl, ok] for lvl, ok in history],
        }, args, "basin.json")
        return EXIT_OK

    if target is not None:
        eq_kwargs = dict(common)
        if "target_radius" in config:
            eq_kwargs["target_radius"] = config["target_radius"]
        cert = basin_certify(system, target, level, sampler, **eq_kwargs)
        report = {"system": name, "mode": "equilibrium", **cert.as_report()}
    else:
        orb_kwargs = dict(common)
        for key in ("witness_tol", "t_search", "recur_tol", "coverage_factor"):
            if key in config:
                orb_kwargs[key] = config[key]
        cert = periodic_orbit_certify(system, orbit_seed, level, sampler,
                                      **orb_kwargs)
        report = {"system": name, "mode": "orbit", **cert.as_report()}
    if dump_members:
        from .report import write_text_atomic
        write_text_atomic(_points_csv(cert.members),
                          os.path.join(_out_dir(args), "members.csv"))
    _emit(report, args, "basin.json")
    return EXIT_OK if cert.passed else EXIT_CERTIFICATE


_HANDLERS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "equilibria": cmd_equilibria,
    "basin": cmd_basin,
}

_CONFIG_FAILURES = (ConfigError, BadInertia, DimensionMismatch)
_INTEGRATION_FAILURES = (StepUnderflow, MaxStepsExceeded, NonFiniteState,
                         UnboundedTrajectory)
_IDENTITY_FAILURES = (NonPositiveDefiniteMetric, NonFiniteValue, SingularLeaf)
_CERTIFICATE_FAILURES = (NotAsymptoticallyStable, AnchorOutsideLevel,
                         NoValidLevel, NotPeriodic, NotOnInvariantSet,
                         NoConvergence, LeafProjectionFailure)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        _cap_threads(args.threads)
    try:
        config = _load_config(args.config, args.command)
        return _HANDLERS[args.command](config, args)
    except _CONFIG_FAILURES as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _INTEGRATION_FAILURES as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except _IDENTITY_FAILURES as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IDENTITY
    except _CERTIFICATE_FAILURES as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE


if __name__ == "__main__":
    sys.exit(main())
