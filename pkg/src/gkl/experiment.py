"""Experiment configs, orchestration and verification.

A config is a JSON object with the keys ``kernel``, ``domain``, ``target``,
``rules``, ``stop`` and ``outputs``.  Relative paths resolve against the
directory holding the config file.  See ``experiments/`` for examples.
"""

from __future__ import annotations

import json
import logging
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, geometry
from .greedy import WORK_DTYPE, SelectionRule, StopCriteria, run_greedy
from .kernels import get_kernel
from .plotting import NoPlottablePoints, emit_plot
from .trace import RunTrace, TraceFormatError, read_trace_csv, write_trace_csv

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RuleSpec",
    "RunResult",
    "load_config",
    "parse_config",
    "build_domain",
    "build_target",
    "run_experiment",
    "verify",
    "verify_traces",
    "rule_from_label",
    "worker_count",
]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

TOP_KEYS = {"name", "kernel", "domain", "target", "rules", "stop", "outputs"}
PLOT_QUANTITIES = ("nu", "sigma", "max_residual", "residual_at_selected",
                   "nu_window", "sigma_window")


class ConfigError(ValueError):
    """The experiment config is malformed."""


@dataclass(frozen=True)
class RuleSpec:
    rule: SelectionRule
    label: str
    restrict: str = "all"  # "all" or "slice"


@dataclass
class ExperimentConfig:
    name: str
    kernel: str
    domain: dict
    target: dict
    rules: list[RuleSpec]
    stop: StopCriteria
    outputs: dict
    base_dir: Path = field(default_factory=Path.cwd)

    def resolve(self, path) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


@dataclass
class RunResult:
    label: str
    trace: RunTrace
    rule: SelectionRule
    checks: list[analysis.CheckResult]
    skipped: list[str]


def _require(mapping, key, where, kind=None):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ConfigError(f"missing key {where}.{key}")
    value = mapping[key]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"{where}.{key} has the wrong type")
    return value


def _number(value, where, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number")
    if integer and int(value) != value:
        raise ConfigError(f"{where} must be an integer")
    return int(value) if integer else float(value)


def _parse_rule(spec, i) -> RuleSpec:
    where = f"rules[{i}]"
    if not isinstance(spec, dict):
        raise ConfigError(f"{where} must be an object")
    variant = _require(spec, "variant", where, str)
    try:
        if variant == "beta":
            beta = spec.get("beta")
            if isinstance(beta, str) and beta.lower() in ("inf", "infinity"):
                rule = SelectionRule.FOverP()
            else:
                beta = _number(beta, f"{where}.beta")
                rule = SelectionRule.FOverP() if math.isinf(beta) else SelectionRule.Beta(beta)
        elif variant == "f_over_p":
            rule = SelectionRule.FOverP()
        elif variant == "random":
            rule = SelectionRule.Random(_number(spec.get("seed", 0), f"{where}.seed", integer=True))
        else:
            raise ConfigError(f"{where}.variant {variant!r} is not beta, f_over_p or random")
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    restrict = spec.get("restrict", "all")
    if restrict not in ("all", "slice"):
        raise ConfigError(f"{where}.restrict must be 'all' or 'slice'")
    default = rule.label.replace("=", "_").replace("(", "_").replace(")", "")
    if restrict == "slice":
        default = "slice_" + default
    label = spec.get("label", default)
    if not isinstance(label, str) or not label or any(c in label for c in "/\\\n,"):
        raise ConfigError(f"{where}.label must be a plain nonempty string")
    return RuleSpec(rule, label, restrict)


def parse_config(raw: dict, base_dir=None) -> ExperimentConfig:
    """Validate a decoded JSON config."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")

    kernel = _require(_require(raw, "kernel", "config", dict), "name", "kernel", str)
    try:
        model = get_kernel(kernel)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    domain = dict(_require(raw, "domain", "config", dict))
    dim = _number(_require(domain, "dim", "domain"), "domain.dim", integer=True)
    if dim < 1:
        raise ConfigError("domain.dim must be >= 1")
    if model.dim is not None and dim != model.dim:
        raise ConfigError(f"kernel {kernel!r} needs domain.dim = {model.dim}")
    sources = [k for k in ("count", "grid_resolution", "points_csv") if k in domain]
    if len(sources) != 1:
        raise ConfigError("domain needs exactly one of count, grid_resolution, points_csv")
    if "count" in domain:
        if _number(domain["count"], "domain.count", integer=True) < 1:
            raise ConfigError("domain.count must be >= 1")
        _number(_require(domain, "seed", "domain"), "domain.seed", integer=True)
    if "grid_resolution" in domain:
        if _number(domain["grid_resolution"], "domain.grid_resolution", integer=True) < 1:
            raise ConfigError("domain.grid_resolution must be >= 1")
    if "slice" in domain:
        sl = _require(domain, "slice", "domain", dict)
        axis = _number(_require(sl, "axis", "domain.slice"), "domain.slice.axis", integer=True)
        _number(_require(sl, "value", "domain.slice"), "domain.slice.value")
        if not 0 <= axis < dim:
            raise ConfigError("domain.slice.axis out of range")

    target = dict(_require(raw, "target", "config", dict))
    kind = _require(target, "kind", "target", str)
    if kind == "power_law":
        _number(_require(target, "alpha", "target"), "target.alpha")
    elif kind == "synthesized":
        for key in ("centers_seed", "center_count", "coeff_seed"):
            _number(_require(target, key, "target"), f"target.{key}", integer=True)
        if target["center_count"] < 1:
            raise ConfigError("target.center_count must be >= 1")
    elif kind == "csv":
        _require(target, "path", "target", str)
        if "points_csv" not in domain:
            raise ConfigError("target kind csv needs domain.points_csv")
    elif kind != "none":
        raise ConfigError(f"unknown target kind {kind!r}")

    rules_raw = _require(raw, "rules", "config", list)
    if not rules_raw:
        raise ConfigError("rules must be a nonempty list")
    rules = [_parse_rule(r, i) for i, r in enumerate(rules_raw)]
    labels = [r.label for r in rules]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"rule labels must be unique, got {labels}")
    if any(r.restrict == "slice" for r in rules) and "slice" not in domain:
        raise ConfigError("a slice-restricted rule needs domain.slice")
    if kind == "none" and any(r.rule.uses_target for r in rules):
        raise ConfigError("target kind none only supports beta = 0 and random rules")

    stop_raw = raw.get("stop", {})
    if not isinstance(stop_raw, dict):
        raise ConfigError("stop must be an object")
    try:
        stop = StopCriteria(**{k: _number(v, f"stop.{k}", integer=(k == "max_points"))
                               for k, v in stop_raw.items()})
    except TypeError as exc:
        raise ConfigError(f"stop: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"stop: {exc}") from None

    outputs = dict(raw.get("outputs", {}))
    for key in ("trace_csv", "checks_csv", "plot_svg"):
        if key in outputs and not isinstance(outputs[key], str):
            raise ConfigError(f"outputs.{key} must be a string")
    if "trace_csv" in outputs and len(rules) > 1 and "{label}" not in outputs["trace_csv"]:
        raise ConfigError("outputs.trace_csv needs a {label} placeholder with several rules")
    quantities = outputs.get("plot_quantities", ["max_residual"])
    if not isinstance(quantities, list) or not quantities:
        raise ConfigError("outputs.plot_quantities must be a nonempty list")
    for q in quantities:
        if q not in PLOT_QUANTITIES:
            raise ConfigError(f"unknown plot quantity {q!r}")
    if "plot_svg" in outputs and len(quantities) > 1 and "{quantity}" not in outputs["plot_svg"]:
        raise ConfigError("outputs.plot_svg needs a {quantity} placeholder with several quantities")
    refs = outputs.get("plot_references", [])
    if not isinstance(refs, list):
        raise ConfigError("outputs.plot_references must be a list of slopes")
    for r in refs:
        _number(r, "outputs.plot_references[]")

    return ExperimentConfig(
        name=str(raw.get("name", "experiment")),
        kernel=kernel,
        domain=domain,
        target=target,
        rules=rules,
        stop=stop,
        outputs=outputs,
        base_dir=Path(base_dir) if base_dir is not None else Path.cwd(),
    )


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON config; OSError propagates, bad content is ConfigError."""
    path = Path(path)
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return parse_config(raw, base_dir=path.resolve().parent)


def build_domain(config: ExperimentConfig):
    """Return the base candidate set and the slice set (or None)."""
    d = config.domain
    dim = int(d["dim"])
    if "count" in d:
        cset = geometry.sample_random(int(d["seed"]), int(d["count"]), dim)
    elif "grid_resolution" in d:
        cset = geometry.uniform_grid(int(d["grid_resolution"]), dim)
    else:
        cset = geometry.load_points_csv(config.resolve(d["points_csv"]))
        if cset.dim != dim:
            raise ConfigError(f"points_csv has dimension {cset.dim}, expected {dim}")
    slice_set = None
    if "slice" in d:
        slice_set = geometry.project_to_slice(cset, int(d["slice"]["axis"]),
                                              float(d["slice"]["value"]))
    return cset, slice_set


def build_target(config: ExperimentConfig, points: np.ndarray):
    """Target values at ``points`` and ``||f||_H^2`` when it is known exactly."""
    t = config.target
    kind = t["kind"]
    if kind == "none":
        return None, None
    if kind == "power_law":
        # |x|^alpha, which is x^alpha on [0, 1]
        return np.linalg.norm(points, axis=1) ** float(t["alpha"]), None
    if kind == "synthesized":
        model = get_kernel(config.kernel)
        dim = points.shape[1]
        centers = np.random.default_rng(int(t["centers_seed"])).random((int(t["center_count"]), dim))
        coeffs = np.random.default_rng(int(t["coeff_seed"])).standard_normal(int(t["center_count"]))
        c_ld = coeffs.astype(WORK_DTYPE)
        values = model(points.astype(WORK_DTYPE), centers.astype(WORK_DTYPE)) @ c_ld
        norm_sq = c_ld @ model(centers.astype(WORK_DTYPE), centers.astype(WORK_DTYPE)) @ c_ld
        return np.asarray(values, dtype=float), float(norm_sq)
    # csv: one value per row, aligned with domain.points_csv
    path = config.resolve(t["path"])
    try:
        values = np.loadtxt(path, delimiter=",", dtype=float, ndmin=1)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if values.ndim != 1 or values.size != points.shape[0]:
        raise ConfigError(f"{path}: expected {points.shape[0]} values, one per row")
    return values, None


def worker_count(n_jobs: int) -> int:
    """Worker threads for ``n_jobs`` rules, capped by ``GKL_THREADS``."""
    raw = os.environ.get("GKL_THREADS")
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigError(f"GKL_THREADS must be an integer, got {raw!r}") from None
        if cap < 1:
            raise ConfigError("GKL_THREADS must be >= 1")
    return max(1, min(cap, n_jobs))


def _run_one(config, spec: RuleSpec, cset, slice_set, f_base, norm_sq, model):
    meta = {
        "experiment": config.name,
        "label": spec.label,
        "target": config.target["kind"],
        "restrict": spec.restrict,
    }
    if "seed" in config.domain:
        meta["domain_seed"] = int(config.domain["seed"])
    if spec.rule.variant == "random":
        meta["rule_seed"] = spec.rule.seed
    if norm_sq is not None:
        meta["f_norm_sq"] = norm_sq
    if config.target["kind"] == "power_law":
        meta["alpha"] = float(config.target["alpha"])
    if spec.restrict == "slice":
        # the slice run is measured over all candidates but may only pick slice points
        points = np.vstack([cset.points, slice_set.points])
        selectable = np.zeros(len(points), dtype=bool)
        selectable[len(cset):] = True
        f_values = None
        if f_base is not None:
            f_values, _ = build_target(config, points)
        trace = run_greedy(model, points, f_values, spec.rule, config.stop,
                           selectable=selectable, meta=meta)
    else:
        trace = run_greedy(model, cset.points, f_base, spec.rule, config.stop, meta=meta)
    if trace.stop_reason == "breakdown":
        log.warning("rule %s stopped on numerical breakdown after %d points",
                    spec.label, trace.n_selected)
    checks = analysis.run_checks(trace, norm_sq, spec.rule)
    skipped = []
    if norm_sq is None:
        skipped.append("norm-dependent checks (target norm unknown)")
    elif spec.rule.variant == "random":
        skipped.append("beta-specific checks (random rule)")
    return RunResult(spec.label, trace, spec.rule, checks, skipped)


def execute(config: ExperimentConfig) -> list[RunResult]:
    """Run every rule of ``config`` and return the results in rule order."""
    model = get_kernel(config.kernel)
    cset, slice_set = build_domain(config)
    f_base, norm_sq = build_target(config, cset.points)
    if config.target["kind"] == "csv" and cset.n_duplicates:
        raise ConfigError("points_csv contains duplicates, so target values cannot be aligned")
    jobs = config.rules
    workers = worker_count(len(jobs))
    if workers == 1:
        return [_run_one(config, s, cset, slice_set, f_base, norm_sq, model) for s in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_one, config, s, cset, slice_set, f_base, norm_sq, model)
                   for s in jobs]
        return [f.result() for f in futures]


_write_lock = threading.Lock()


def _write(path: Path, text: str):
    with _write_lock:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            fh.write(text)


def _plot_series(results: list[RunResult], quantity: str):
    series = []
    for res in results:
        if quantity in ("nu_window", "sigma_window"):
            ns, values = analysis.geometric_mean_series(getattr(res.trace, quantity[:-7]))
        else:
            values = res.trace.column(quantity)
            ns = res.trace.n.astype(float)
            # row 0 sits at n = 0, which has no log-log position; shift to n + 1
            ns = ns + 1
        series.append((res.label, ns, values))
    return series


def write_outputs(config: ExperimentConfig, results: list[RunResult]) -> list[Path]:
    written = []
    out = config.outputs
    if "trace_csv" in out:
        for res in results:
            path = config.resolve(out["trace_csv"].replace("{label}", res.label))
            _write(path, write_trace_csv(res.trace))
            written.append(path)
    if "checks_csv" in out:
        all_checks, labels = [], []
        for res in results:
            all_checks += res.checks
            labels += [res.label] * len(res.checks)
        path = config.resolve(out["checks_csv"])
        _write(path, analysis.write_checks_csv(all_checks, label_column="run", labels=labels))
        written.append(path)
    if "plot_svg" in out:
        refs = [float(r) for r in out.get("plot_references", [])]
        for q in out.get("plot_quantities", ["max_residual"]):
            path = config.resolve(out["plot_svg"].replace("{quantity}", q))
            try:
                text, _ = emit_plot(_plot_series(results, q), refs,
                                    title=f"{config.name}: {q}", ylabel=q)
            except NoPlottablePoints:
                log.warning("no plottable points for %s, %s not written", q, path)
                continue
            _write(path, text)
            written.append(path)
    return written


def run_experiment(config: ExperimentConfig) -> tuple[list[RunResult], list[Path]]:
    """Run all rules and write the configured outputs."""
    results = execute(config)
    return results, write_outputs(config, results)


def summarize(results: list[RunResult]) -> tuple[list[str], int]:
    """Human-readable summary lines and the number of failed checks."""
    lines, failed = [], 0
    for res in results:
        bad = [c for c in res.checks if not c.passed]
        failed += len(bad)
        lines.append(f"{res.label}: {len(res.checks) - len(bad)}/{len(res.checks)} checks "
                     f"passed, {res.trace.n_selected} points, stop={res.trace.stop_reason}")
        for note in res.skipped:
            lines.append(f"{res.label}: skipped {note}")
        for c in bad:
            lines.append(f"{res.label}: FAIL {c.name} n={c.n} lhs_log={c.lhs_log:.6e} "
                         f"rhs_log={c.rhs_log:.6e}")
    return lines, failed


def verify(config: ExperimentConfig) -> tuple[int, list[str]]:
    """Run fresh traces and every applicable check; exit status 0 iff all pass."""
    results = execute(config)
    lines, failed = summarize(results)
    return (EXIT_CHECK_FAILED if failed else EXIT_OK), lines


def rule_from_label(label: str) -> SelectionRule | None:
    """Invert :attr:`SelectionRule.label`; None when the label is not recognised."""
    if label == "beta=inf":
        return SelectionRule.FOverP()
    if label.startswith("beta="):
        try:
            return SelectionRule.Beta(float(label[5:]))
        except ValueError:
            return None
    if label.startswith("random(seed=") and label.endswith(")"):
        try:
            return SelectionRule.Random(int(label[12:-1]))
        except ValueError:
            return None
    return None


def verify_traces(paths) -> tuple[int, list[str]]:
    """Offline verification of trace CSVs, using the norm and rule in their headers.

    Raises OSError or TraceFormatError for unreadable or corrupt files.
    """
    results = []
    for p in paths:
        trace = read_trace_csv(p)
        for col in ("nu", "sigma"):
            vals = getattr(trace, col)
            if np.any(vals[np.isfinite(vals)] < 0):
                raise TraceFormatError(f"{p}: negative {col}")
        rule = rule_from_label(str(trace.meta.get("rule", "")))
        norm_sq = trace.meta.get("f_norm_sq")
        norm_sq = float(norm_sq) if isinstance(norm_sq, (int, float)) else None
        try:
            checks = analysis.run_checks(trace, norm_sq, rule)
        except analysis.InconsistentNormError as exc:
            raise TraceFormatError(f"{p}: {exc}") from None
        skipped = []
        if norm_sq is None:
            skipped.append("norm-dependent checks (no f_norm_sq in header)")
        elif rule is None or rule.variant == "random":
            skipped.append("beta-specific checks (no beta rule in header)")
        results.append(RunResult(str(trace.meta.get("label", p)), trace, rule, checks, skipped))
    lines, failed = summarize(results)
    return (EXIT_CHECK_FAILED if failed else EXIT_OK), lines
