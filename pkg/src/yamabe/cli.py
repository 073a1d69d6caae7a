"""Command-line experiment runner.

Each subcommand reads an optional JSON config, fills in defaults, validates
every key before computing, runs one experiment and emits a deterministic
JSON report. Exit status: 0 when all checks and in-config assertions pass,
1 on failure (including numerical failures, which are reported), 2 for an
invalid configuration.

Config keys
-----------
``experiment``
    Optional; must match the subcommand.
``manifold``
    ``{"kind": "round_sphere" | "flat_torus", "n": int, "periods": [float] | null}``.
``grid``
    ``{"nodes": int}``: radial nodes on spheres, nodes per axis on tori.
    Defaults to 512 on spheres, 96 for torus Green functions and 16 for
    other torus runs.
``factor``
    ``null`` or ``{"alpha": float in (0, 1), "mexp": float >= 0}``.
``potential``
    ``"conformal_laplacian"``, ``{"constant": float}`` or
    ``{"nodal_file": path}`` (``.npy`` or whitespace separated text,
    relative paths resolved against the config file).
``solver``
    ``{"ladder": [float] | null, "residual_tol": float, "max_iter": int}``.
``seed``
    Unsigned 64-bit integer driving every random probe.
``params``
    Experiment-specific, see :data:`PARAM_DEFAULTS`.
``assertions``
    List of ``{"path": "results.key.sub", <op>: value}`` with ``<op>`` one of
    ``equals, approx, lt, le, gt, ge``; ``approx`` takes ``rtol``/``atol``.
``timing``
    Record wall time in the report (off by default, since it breaks
    byte-identical reruns).
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import bootstrap_trace
from .discrete_ops import assemble_operator, conformal_laplacian, smallest_eigenvalue, yamabe_functional
from .errors import (ConfigError, ConvergenceError, DomainError, GridMismatchError, InvariantError,
                     NotCoerciveError, NotHomogeneousError, ResolutionError, SchemaMismatchError)
from .geometry import ModelManifold, MetricSpec, RadialGrid, TorusGrid, singular_conformal_factor
from .green_function import (ParametrixConfig, assemble_green, conformal_green, extract_mass,
                             fourier_green_oracle, verify_delta)
from .test_functions import (SchoenParams, best_constant_inv2, bubble_scan, schoen_interface_gaps,
                             schoen_test_function)
from .yamabe_solver import (MAX_ITER, RESIDUAL_TOL, check_uniqueness, conformal_invariance_check,
                            continuation_to_critical, solve_constant_curvature)

__all__ = ["EXPERIMENTS", "ReportEnvelope", "validate_config", "run", "compare_reports", "main"]

SCHEMA = "yamabe-report"
SCHEMA_VERSION = 1

EXPERIMENTS = ("invariant", "solve", "green", "bubble-scan", "schoen", "bootstrap", "uniqueness",
               "conformal-check")

TOP_KEYS = {"experiment", "manifold", "grid", "factor", "potential", "solver", "seed", "params",
            "assertions", "timing"}

PARAM_DEFAULTS = {
    "invariant": {},
    "solve": {"exclusion_radius": 0.0, "write_profile": True},
    "green": {"delta": None, "pole": None, "mass": None, "r0": 0.2, "levels": 5, "oracle": True,
              "write_profile": True},
    "bubble-scan": {"epsilons": [0.4, 0.2, 0.1, 0.05], "cutoff_radius": None},
    "schoen": {"rho0": 0.3, "epsilon": 0.02, "delta": None},
    "bootstrap": {"n": 4, "p": "3", "descending": False},
    "uniqueness": {"seeds": 4, "tol": 1e-6},
    "conformal-check": {"probes": 20, "compare_mu": True},
}

_SPHERE = {"kind": "round_sphere", "n": 3, "periods": None}
_TORUS = {"kind": "flat_torus", "n": 3, "periods": None}

_BASE_DEFAULTS = {
    "manifold": _SPHERE,
    "grid": {"nodes": None},
    "factor": None,
    "potential": "conformal_laplacian",
    "solver": {"ladder": None, "residual_tol": RESIDUAL_TOL, "max_iter": MAX_ITER},
    "seed": 0,
    "assertions": [],
    "timing": False,
}

_EXPERIMENT_DEFAULTS = {
    "uniqueness": {"manifold": _TORUS, "potential": {"constant": -1.0}},
    "conformal-check": {"factor": {"alpha": 0.5, "mexp": 1.0}},
}

_NUMERIC_FAILURES = (ConvergenceError, NotCoerciveError, InvariantError, ResolutionError, DomainError,
                     GridMismatchError, NotHomogeneousError)


# ---------------------------------------------------------------------------
# validation


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _unknown(prefix: str, given: dict, allowed, errors: list) -> None:
    for k in sorted(set(given) - set(allowed)):
        errors.append(f"{prefix}{k}: unknown key")


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate_config(raw: dict, experiment: str, base_dir: Path | None = None) -> dict:
    """Fill defaults and check every key.

    Returns the completed config. Raises :class:`ConfigError` listing all
    violations at once.
    """
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: config must be a JSON object"])
    if experiment not in EXPERIMENTS:
        raise ConfigError([f"experiment: unknown kind {experiment!r}"])
    _unknown("", raw, TOP_KEYS, errors)
    if "experiment" in raw and raw["experiment"] != experiment:
        errors.append(f"experiment: config says {raw['experiment']!r} but the subcommand is {experiment!r}")
    defaults = _merge(_BASE_DEFAULTS, _EXPERIMENT_DEFAULTS.get(experiment, {}))
    defaults["params"] = copy.deepcopy(PARAM_DEFAULTS[experiment])
    cfg = copy.deepcopy(defaults)
    for k, v in raw.items():
        if k not in TOP_KEYS or k == "experiment":
            continue
        if k in ("manifold", "grid", "solver", "params") and isinstance(v, dict):
            _unknown(f"{k}.", v, defaults[k], errors)
            cfg[k] = _merge(defaults[k], {kk: vv for kk, vv in v.items() if kk in defaults[k]})
        elif k == "factor" and isinstance(v, dict):
            _unknown("factor.", v, {"alpha", "mexp"}, errors)
            cfg[k] = {"alpha": v.get("alpha"), "mexp": v.get("mexp", 1.0)}
        else:
            cfg[k] = copy.deepcopy(v)
    cfg["experiment"] = experiment

    m = cfg["manifold"]
    if not isinstance(m, dict):
        errors.append("manifold: must be an object")
    else:
        if m.get("kind") not in ("round_sphere", "flat_torus"):
            errors.append("manifold.kind: must be 'round_sphere' or 'flat_torus'")
        if not (_is_int(m.get("n")) and m["n"] >= 3):
            errors.append("manifold.n: must be an integer >= 3")
        p = m.get("periods")
        if p is not None:
            if m.get("kind") == "round_sphere":
                errors.append("manifold.periods: only tori have periods")
            elif not (isinstance(p, list) and all(_is_num(x) and x > 0 for x in p)
                      and (not _is_int(m.get("n")) or len(p) == m["n"])):
                errors.append("manifold.periods: must be n positive numbers")
    g = cfg["grid"]
    if isinstance(g, dict) and g.get("nodes") is None and isinstance(m, dict):
        g["nodes"] = 512 if m.get("kind") == "round_sphere" else (96 if experiment == "green" else 16)
    if not isinstance(g, dict) or not (_is_int(g.get("nodes")) and g["nodes"] >= 4):
        errors.append("grid.nodes: must be an integer >= 4")
    f = cfg["factor"]
    if f is not None:
        if not isinstance(f, dict):
            errors.append("factor: must be null or an object")
        else:
            a = f.get("alpha")
            if not (_is_num(a) and 0.0 < a < 1.0):
                errors.append(f"factor.alpha: must lie in the open interval (0, 1), got {a!r}")
            if not (_is_num(f.get("mexp")) and f["mexp"] >= 0):
                errors.append("factor.mexp: must be a number >= 0")
    pot = cfg["potential"]
    if pot != "conformal_laplacian":
        if not isinstance(pot, dict) or len(pot) != 1 or not set(pot) <= {"constant", "nodal_file"}:
            errors.append("potential: must be 'conformal_laplacian', {'constant': c} or {'nodal_file': path}")
        elif "constant" in pot and not _is_num(pot["constant"]):
            errors.append("potential.constant: must be a finite number")
        elif "nodal_file" in pot:
            if not isinstance(pot["nodal_file"], str):
                errors.append("potential.nodal_file: must be a path string")
            else:
                path = Path(pot["nodal_file"])
                if not path.is_absolute() and base_dir is not None:
                    path = base_dir / path
                if not path.exists():
                    errors.append(f"potential.nodal_file: {str(path)!r} does not exist")
                else:
                    cfg["potential"] = {"nodal_file": str(path)}
    s = cfg["solver"]
    if isinstance(s, dict):
        lad = s.get("ladder")
        if lad is not None and not (isinstance(lad, list) and lad and all(_is_num(x) and x > 2 for x in lad)):
            errors.append("solver.ladder: must be null or a non-empty list of exponents > 2")
        if not (_is_num(s.get("residual_tol")) and s["residual_tol"] > 0):
            errors.append("solver.residual_tol: must be a positive number")
        if not (_is_int(s.get("max_iter")) and s["max_iter"] > 0):
            errors.append("solver.max_iter: must be a positive integer")
    else:
        errors.append("solver: must be an object")
    if not (_is_int(cfg["seed"]) and 0 <= cfg["seed"] < 2 ** 64):
        errors.append("seed: must be an unsigned 64-bit integer")
    if not isinstance(cfg["timing"], bool):
        errors.append("timing: must be true or false")
    if not isinstance(cfg["assertions"], list):
        errors.append("assertions: must be a list")
    else:
        for i, a in enumerate(cfg["assertions"]):
            ops = set(a) & {"equals", "approx", "lt", "le", "gt", "ge"} if isinstance(a, dict) else set()
            if not isinstance(a, dict) or not isinstance(a.get("path"), str) or len(ops) != 1:
                errors.append(f"assertions[{i}]: needs a 'path' and exactly one comparison")
            else:
                _unknown(f"assertions[{i}].", a, {"path", "equals", "approx", "lt", "le", "gt", "ge",
                                                  "rtol", "atol"}, errors)
    if isinstance(cfg["params"], dict):
        errors.extend(_validate_params(experiment, cfg))
    else:
        errors.append("params: must be an object")
    if errors:
        raise ConfigError(errors)
    return cfg


def _validate_params(kind: str, cfg: dict) -> list[str]:
    p = cfg["params"]
    errs = []

    def pos(key, allow_none=False):
        v = p.get(key)
        if v is None and allow_none:
            return
        if not (_is_num(v) and v > 0):
            errs.append(f"params.{key}: must be a positive number")

    if kind == "solve":
        if not (_is_num(p["exclusion_radius"]) and p["exclusion_radius"] >= 0):
            errs.append("params.exclusion_radius: must be a number >= 0")
    elif kind == "green":
        pos("delta", allow_none=True)
        pos("r0")
        if not (_is_int(p["levels"]) and p["levels"] >= 2):
            errs.append("params.levels: must be an integer >= 2")
        if p["pole"] is not None and not (isinstance(p["pole"], list) and all(_is_num(x) for x in p["pole"])):
            errs.append("params.pole: must be null or a list of coordinates")
        if cfg["factor"] is not None and cfg["potential"] != "conformal_laplacian":
            errs.append("potential: conformal factors need the conformal Laplacian for the Green transfer")
    elif kind == "bubble-scan":
        e = p["epsilons"]
        if not (isinstance(e, list) and e and all(_is_num(x) and x > 0 for x in e)):
            errs.append("params.epsilons: must be a non-empty list of positive numbers")
        pos("cutoff_radius", allow_none=True)
    elif kind == "schoen":
        pos("rho0")
        pos("epsilon")
        pos("delta", allow_none=True)
    elif kind == "bootstrap":
        if not (_is_int(p["n"]) and p["n"] >= 3):
            errs.append("params.n: must be an integer >= 3")
        try:
            val = Fraction(str(p["p"]))
            if _is_int(p["n"]) and val <= Fraction(p["n"], 2):
                errs.append("params.p: must exceed n/2")
        except (ValueError, ZeroDivisionError):
            errs.append("params.p: must be a rational such as '7/3'")
    elif kind == "uniqueness":
        if not (_is_int(p["seeds"]) and p["seeds"] >= 2):
            errs.append("params.seeds: must be an integer >= 2")
        pos("tol")
    elif kind == "conformal-check":
        if not (_is_int(p["probes"]) and p["probes"] >= 1):
            errs.append("params.probes: must be a positive integer")
        if cfg["factor"] is None:
            errs.append("factor: the conformal check needs a factor")
    for key in ("write_profile", "mass", "oracle", "descending", "compare_mu"):
        if key in p and not isinstance(p[key], bool) and not (key == "mass" and p[key] is None):
            errs.append(f"params.{key}: must be true or false")
    return errs


# ---------------------------------------------------------------------------
# construction


def build_spec(cfg: dict) -> MetricSpec:
    m = cfg["manifold"]
    nodes = cfg["grid"]["nodes"]
    if m["kind"] == "round_sphere":
        man = ModelManifold.sphere(m["n"])
        grid = RadialGrid(m["n"], nodes)
    else:
        man = ModelManifold.torus(m["n"], m["periods"])
        grid = TorusGrid(man, nodes)
    spec = MetricSpec(man, grid)
    f = cfg["factor"]
    if f is not None:
        spec = spec.conformal(singular_conformal_factor(man, grid, f["alpha"], f["mexp"]))
    return spec


def build_operator(cfg: dict, spec: MetricSpec):
    pot = cfg["potential"]
    if pot == "conformal_laplacian":
        return conformal_laplacian(spec)
    if "constant" in pot:
        return assemble_operator(spec, float(pot["constant"]))
    path = pot["nodal_file"]
    h = np.load(path) if path.endswith(".npy") else np.loadtxt(path)
    return assemble_operator(spec, np.ravel(h))


# ---------------------------------------------------------------------------
# experiments


def _solver_args(cfg):
    s = cfg["solver"]
    return {"ladder": s["ladder"], "tol": s["residual_tol"], "max_iter": s["max_iter"]}


def _exp_invariant(cfg, spec):
    op = build_operator(cfg, spec)
    rep = continuation_to_critical(op, **_solver_args(cfg))
    res = rep.to_dict()
    res["functional_at_one"] = yamabe_functional(op, np.ones(op.size))
    res["kinv2_relative_gap"] = (rep.mu_estimate - rep.kinv2) / rep.kinv2
    checks = {"positive_solution": rep.positivity_margin > 0,
              "residual_within_tol": rep.final_residual <= cfg["solver"]["residual_tol"]}
    return res, checks, {"solution": ("r", spec.distances(), rep.solution)}


def _exp_solve(cfg, spec):
    if cfg["potential"] != "conformal_laplacian":
        raise DomainError("constant-curvature solves use the conformal Laplacian")
    s = cfg["solver"]
    psi, rep = solve_constant_curvature(spec, cfg["params"]["exclusion_radius"], s["ladder"], s["residual_tol"])
    checks = {"positive_solution": rep.solve.positivity_margin > 0,
              "residual_within_tol": rep.solve.final_residual <= s["residual_tol"]}
    profiles = {"psi": ("r", spec.distances(), psi.values)} if cfg["params"]["write_profile"] else {}
    return rep.to_dict(), checks, profiles


def _green_base(cfg, spec, delta=None):
    base = spec.without_factor()
    if cfg["factor"] is None:
        op = build_operator(cfg, spec)
    else:
        op = conformal_laplacian(base)
    if delta is None:
        delta = 1.5 if base.manifold.is_sphere else 0.45 * min(base.manifold.periods)
    pcfg = ParametrixConfig(spec.n, float(delta))
    return base, op, pcfg


def _exp_green(cfg, spec):
    p = cfg["params"]
    base, op, pcfg = _green_base(cfg, spec, p["delta"])
    G = assemble_green(pcfg, op, p["pole"])
    res = {"parametrix": pcfg.to_dict(), "smallest_eigenvalue": smallest_eigenvalue(op)[0]}
    delta = verify_delta(G, op)
    res["delta_check"] = delta.to_dict()
    checks = {"delta_property": delta.passed}
    if isinstance(base.grid, TorusGrid):
        c = float(op.potential[0])
        integral = float(np.dot(op.mass, G.values))
        res["integral"] = integral
        res["zero_mode_error"] = abs(c * integral - 1.0)
        checks["zero_mode"] = res["zero_mode_error"] <= 1e-6
        if p["oracle"] and base.n == 3:
            orc = fourier_green_oracle(base.grid, c, G.spec.pole)
            mask = G.radii >= 0.1
            err = np.linalg.norm(G.values[mask] - orc.values[mask]) / np.linalg.norm(orc.values[mask])
            res["oracle"] = {"relative_l2_error": float(err), "fourier_truncation": orc.fourier_truncation,
                             "image_truncation": orc.image_truncation, "splitting": orc.splitting}
            checks["oracle_agreement"] = bool(err <= 1e-3)
    res["decay_constant"] = G.decay_constant()
    profile = G.normalize()
    if cfg["factor"] is not None:
        profile = conformal_green(spec.factor.reciprocal(), profile)
        d2 = verify_delta(profile, conformal_laplacian(spec))
        res["conformal_delta_check"] = d2.to_dict()
        checks["conformal_delta_property"] = d2.passed
    if p["mass"] or (p["mass"] is None and base.manifold.is_sphere):
        res["mass"] = extract_mass(profile, p["r0"], p["levels"]).to_dict()
    profiles = {}
    if p["write_profile"]:
        profiles["green"] = profile
    return res, checks, profiles


def _exp_bubble(cfg, spec):
    op = build_operator(cfg, spec)
    rep = continuation_to_critical(op, **_solver_args(cfg))
    scan = bubble_scan(spec, cfg["params"]["epsilons"], op, cfg["params"]["cutoff_radius"], rep.mu_estimate)
    res = scan.to_dict()
    res["relative_excess"] = [None if v is None else (v - scan.kinv2) / scan.kinv2 for v in scan.values]
    return res, {"mu_below_scan": bool(scan.infimum_ok)}, {}


def _exp_schoen(cfg, spec):
    p = cfg["params"]
    base, op, pcfg = _green_base(cfg, spec, p["delta"])
    G = assemble_green(pcfg, op).normalize()
    if cfg["factor"] is not None:
        G = conformal_green(spec.factor.reciprocal(), G)
    mass = extract_mass(G)
    sp = SchoenParams.matched(p["rho0"], p["epsilon"], mass.mass, spec.n)
    u = schoen_test_function(spec, G, sp)
    gaps = schoen_interface_gaps(G, sp)
    value = yamabe_functional(conformal_laplacian(spec), u)
    kinv2 = best_constant_inv2(spec.n)
    res = {"mass": mass.to_dict(), "epsilon0": sp.epsilon0, "matching_defect": sp.matching_defect(),
           "interface_gaps": list(gaps), "functional": value, "kinv2": kinv2,
           "functional_lt_kinv2": bool(value < kinv2)}
    return res, {"matching_identity": sp.satisfied, "positive_field": bool(np.all(u > 0))}, {}


def _exp_bootstrap(cfg, spec):
    p = cfg["params"]
    tr = bootstrap_trace(p["n"], str(p["p"]), descending=p["descending"])
    return tr.to_dict(), {"terminated": tr.terminal.value != "Diverged"}, {}


def _exp_uniqueness(cfg, spec):
    op = build_operator(cfg, spec)
    rng = np.random.default_rng(cfg["seed"])
    rep = check_uniqueness(op, cfg["params"]["seeds"], rng, cfg["params"]["tol"])
    return rep.to_dict(), {"proportional": rep.passed}, {}


def _exp_conformal(cfg, spec):
    rng = np.random.default_rng(cfg["seed"])
    base = spec.without_factor()
    rep = conformal_invariance_check(base, spec.factor, cfg["params"]["probes"], rng,
                                     cfg["params"]["compare_mu"])
    checks = {"identity": rep.identity_max_error <= 1e-8}
    if rep.mu_relative_difference is not None:
        checks["mu_invariant"] = rep.mu_relative_difference <= 1e-4
    return rep.to_dict(), checks, {}


_DISPATCH = {
    "invariant": _exp_invariant,
    "solve": _exp_solve,
    "green": _exp_green,
    "bubble-scan": _exp_bubble,
    "schoen": _exp_schoen,
    "bootstrap": _exp_bootstrap,
    "uniqueness": _exp_uniqueness,
    "conformal-check": _exp_conformal,
}


# ---------------------------------------------------------------------------
# reports


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _lookup(doc: dict, path: str):
    cur = doc
    for part in path.split("."):
        if isinstance(cur, list):
            cur = cur[int(part)]
        else:
            cur = cur[part]
    return cur


def _evaluate_assertion(doc: dict, a: dict) -> dict:
    out = {"path": a["path"]}
    try:
        v = _lookup(doc, a["path"])
    except (KeyError, IndexError, ValueError, TypeError):
        out.update(value=None, passed=False, reason="path not found")
        return out
    out["value"] = v
    if "equals" in a:
        ok = v == a["equals"]
    elif "approx" in a:
        ok = _is_num(v) and math.isclose(v, a["approx"], rel_tol=a.get("rtol", 1e-9), abs_tol=a.get("atol", 0.0))
    else:
        op = next(k for k in ("lt", "le", "gt", "ge") if k in a)
        ref = a[op]
        ok = _is_num(v) and {"lt": v < ref, "le": v <= ref, "gt": v > ref, "ge": v >= ref}[op]
    out["passed"] = bool(ok)
    return out


@dataclass
class ReportEnvelope:
    """Self-describing experiment report."""

    experiment: str
    config: dict
    results: dict
    checks: dict
    assertions: list
    tolerances: dict
    grid: dict | None
    failure: dict | None = None
    wall_time: float | None = None
    profiles: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return (self.failure is None and all(self.checks.values())
                and all(a["passed"] for a in self.assertions))

    def to_dict(self) -> dict:
        d = {"schema": SCHEMA, "schema_version": SCHEMA_VERSION, "artifact_version": __version__,
             "experiment": self.experiment, "config": self.config, "results": self.results,
             "checks": self.checks, "assertions": self.assertions, "tolerances": self.tolerances,
             "grid": self.grid, "status": "pass" if self.passed else "fail"}
        if self.failure is not None:
            d["failure"] = self.failure
        if self.wall_time is not None:
            d["wall_time_s"] = self.wall_time
        return _jsonable(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, out_dir) -> list[Path]:
        """Write the JSON report and CSV profiles; returns the paths."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{self.experiment}.json"]
        paths[0].write_text(self.to_json())
        for name, prof in self.profiles.items():
            path = out / f"{self.experiment}_{name}.csv"
            if isinstance(prof, tuple):
                label, r, v = prof
                order = np.argsort(r, kind="stable")
                lines = [f"{label},value"] + [f"{float(r[i])!r},{float(v[i])!r}" for i in order]
                path.write_text("\n".join(lines) + "\n")
            else:
                prof.to_csv(path)
            paths.append(path)
        return paths


def run(cfg: dict) -> ReportEnvelope:
    """Run a validated config (see :func:`validate_config`)."""
    kind = cfg["experiment"]
    tolerances = {"eigen_residual": 1e-8, "solve_residual": 1e-10,
                  "critical_residual": cfg["solver"]["residual_tol"]}
    t0 = time.perf_counter()
    grid = None
    failure = None
    results, checks, profiles = {}, {}, {}
    try:
        spec = None if kind == "bootstrap" else build_spec(cfg)
        grid = None if spec is None else spec.grid.describe()
        results, checks, profiles = _DISPATCH[kind](cfg, spec)
    except _NUMERIC_FAILURES as exc:
        failure = {"type": type(exc).__name__, "message": str(exc)}
        for attr in ("residual", "iterations", "eigenvalue", "detail"):
            if hasattr(exc, attr):
                failure[attr] = getattr(exc, attr)
    rep = ReportEnvelope(kind, cfg, results, {k: bool(v) for k, v in checks.items()}, [], tolerances, grid,
                         failure, None, profiles)
    doc = rep.to_dict()
    rep.assertions = [_evaluate_assertion(doc, a) for a in cfg["assertions"]]
    if cfg["timing"]:
        rep.wall_time = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# comparison


def _walk(a, b, path, rtol, atol, tolerances, diffs):
    if isinstance(a, dict) and isinstance(b, dict):
        for k in sorted(set(a) | set(b)):
            p = f"{path}.{k}" if path else k
            if k not in a or k not in b:
                diffs.append({"path": p, "kind": "missing", "a": a.get(k), "b": b.get(k)})
            else:
                _walk(a[k], b[k], p, rtol, atol, tolerances, diffs)
        return
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            diffs.append({"path": path, "kind": "length", "a": len(a), "b": len(b)})
            return
        for i, (x, y) in enumerate(zip(a, b)):
            _walk(x, y, f"{path}.{i}", rtol, atol, tolerances, diffs)
        return
    if _is_num(a) and _is_num(b):
        rt = tolerances.get(path, rtol)
        if not math.isclose(a, b, rel_tol=rt, abs_tol=atol):
            diffs.append({"path": path, "kind": "numeric", "a": a, "b": b, "abs": abs(a - b),
                          "rel": abs(a - b) / max(abs(a), abs(b))})
        return
    if a != b:
        diffs.append({"path": path, "kind": "value", "a": a, "b": b})


def compare_reports(a, b, rtol: float = 1e-12, atol: float = 0.0, tolerances: dict | None = None) -> list[dict]:
    """Field-wise diff of two report files (or parsed dicts).

    Parameters
    ----------
    a, b : path or dict
        Reports produced by :func:`run`.
    rtol, atol : float
        Default numeric tolerances.
    tolerances : dict, optional
        Per-path relative tolerances, e.g. ``{"results.mu_estimate": 1e-4}``.

    Returns
    -------
    list of dict
        One entry per differing field; empty for matching reports.

    Raises
    ------
    SchemaMismatchError
        If schema, schema version or experiment kind differ.
    """
    docs = []
    for x in (a, b):
        docs.append(json.loads(Path(x).read_text()) if not isinstance(x, dict) else x)
    da, db = docs
    for key in ("schema", "schema_version", "experiment"):
        if da.get(key) != db.get(key):
            raise SchemaMismatchError(f"{key} differs: {da.get(key)!r} vs {db.get(key)!r}")
    diffs: list[dict] = []
    _walk(da, db, "", rtol, atol, tolerances or {}, diffs)
    return diffs


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="yamabe", description="Yamabe-type equation experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", type=Path, help="JSON config file")
        sp.add_argument("--out", type=Path, help="directory for the JSON report and CSV profiles")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--grid", type=int, help="override grid.nodes")
        sp.add_argument("--json", action="store_true", help="print the report to stdout")
    cp = sub.add_parser("compare", help="diff two reports")
    cp.add_argument("a", type=Path)
    cp.add_argument("b", type=Path)
    cp.add_argument("--rtol", type=float, default=1e-12)
    cp.add_argument("--json", action="store_true", help="print the diff as JSON")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "compare":
        try:
            diffs = compare_reports(args.a, args.b, rtol=args.rtol)
        except SchemaMismatchError as exc:
            print(f"schema mismatch: {exc}", file=sys.stderr)
            return 2
        except (OSError, json.JSONDecodeError) as exc:
            print(f"cannot read report: {exc}", file=sys.stderr)
            return 2
        if args.json:
            print(json.dumps(_jsonable(diffs), sort_keys=True, indent=2))
        else:
            for d in diffs:
                print(f"{d['path']}: {d['kind']} {d.get('a')!r} -> {d.get('b')!r}")
            print(f"{len(diffs)} differing field(s)")
        return 0 if not diffs else 1
    raw: dict = {}
    base_dir = None
    if args.config is not None:
        try:
            raw = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"cannot read config: {exc}", file=sys.stderr)
            return 2
        base_dir = args.config.parent
    if isinstance(raw, dict):
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.grid is not None:
            raw.setdefault("grid", {})
            if isinstance(raw["grid"], dict):
                raw["grid"]["nodes"] = args.grid
    try:
        cfg = validate_config(raw, args.command, base_dir)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    rep = run(cfg)
    if args.out is not None:
        rep.write(args.out)
    if args.json:
        sys.stdout.write(rep.to_json())
    else:
        status = "pass" if rep.passed else "fail"
        print(f"{cfg['experiment']}: {status}")
        if rep.failure is not None:
            print(f"  {rep.failure['type']}: {rep.failure['message']}")
    return 0 if rep.passed else 1

