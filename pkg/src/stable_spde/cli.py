"""Command-line experiment runner.

    stable-spde run config.json [--seed N] [--output-dir DIR]
    stable-spde verify out/manifest.json
    stable-spde schema

A config is a JSON object ``{"schema_version": 1, "experiment": ..., "seed":
..., "output_dir": ..., "params": {...}}``.  Unknown keys anywhere are errors.
Every run writes ``manifest.json`` next to its data files, including on
failure.  Floats in CSV files use Python's shortest round-trip ``repr``.

Exit status: 0 all checks pass, 1 a check failed, 2 bad config or missing
artifacts, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import sys
import tempfile
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate

from . import __version__
from . import heat, ou, product, semilinear
from .stable import StableLaw
from .tails import PowerLaw, Verdict

SCHEMA_VERSION = 1
TOP_KEYS = {"schema_version", "experiment", "seed", "output_dir", "params"}

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parameter schema: experiment -> {key: default}; a default of REQUIRED must be given

REQUIRED = object()


class Section(dict):
    """A nested parameter group validated against its own defaults."""


_MODEL = Section({
    "kind": "power",  # "power" or "heat"
    "alpha": REQUIRED,
    "N": 16,
    "gamma": {"coef": 1.0, "exponent": 2.0},
    "beta": {"coef": 1.0, "exponent": 0.0},
    "d": 1,
    "cutoff": 16,
    "beta_rule": None,
})
_DRIFT = Section({"kind": REQUIRED, "amplitude": 1.0})

SCHEMA: dict[str, dict] = {
    "density": {"alpha": REQUIRED, "x_min": -20.0, "x_max": 20.0, "n_points": 401, "tolerance": 1e-8, "norm_tolerance": 1e-6},
    "measure": {
        "alpha": REQUIRED,
        "N": 3,
        "q": {"coef": 1.0, "exponent": -2.0},
        "u": [0.5, 0.25, 0.125],
        "v": [0.0, 0.0, 0.0],
        "M": 100000,
    },
    "ou": {"model": _MODEL, "x0": 1.0, "T": 1.0, "steps": 100},
    "gradient": {"model": _MODEL, "x": 0.0, "direction": 1, "t": 0.5, "M": 100000, "eps": 1e-3},
    "semilinear": {"model": _MODEL, "drift": _DRIFT, "x0": 0.0, "T": 1.0, "steps": 100},
    "galerkin": {"model": _MODEL, "drift": _DRIFT, "x0": 0.0, "T": 1.0, "steps": 100, "ns": [4, 8, 16]},
    "heat": {"d": 1, "cutoff": 16, "beta_rule": None, "alpha": 1.5, "T": 1.0, "steps": 100, "n_points": 513, "t_index": -1, "parseval_tolerance": 1e-3},
    "probes": {
        "model": _MODEL,
        "t": 1.0,
        "p": 1.0,
        "M": 20000,
        "eps": 0.5,
        "h_grid": [0.4, 0.2, 0.1, 0.05, 0.025],
        "t_grid": [0.1, 0.5, 1.0],
        "radius": 1.0,
    },
}

def _fill(given: dict, defaults: dict, where: str) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    out = {}
    for key, default in defaults.items():
        if isinstance(default, Section):
            out[key] = _fill(given.get(key, {}), default, f"{where}.{key}")
        elif key in given:
            out[key] = given[key]
        elif default is REQUIRED:
            raise ConfigError(f"{where}: missing required key {key!r}")
        else:
            out[key] = copy.deepcopy(default)
    return out


def resolve_config(raw: dict, seed_override: int | None = None) -> dict:
    """Validate the top level and fill experiment defaults (fail-closed on unknown keys)."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    exp = raw.get("experiment")
    if exp not in SCHEMA:
        raise ConfigError(f"experiment must be one of {sorted(SCHEMA)}")
    seed = raw.get("seed") if seed_override is None else seed_override
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ConfigError("seed is mandatory and must be a 64-bit unsigned integer")
    params = raw.get("params", {})
    return {
        "schema_version": SCHEMA_VERSION,
        "experiment": exp,
        "seed": seed,
        "output_dir": str(raw.get("output_dir", "out")),
        "params": _fill(params, SCHEMA[exp], "params"),
    }


def schema_document() -> dict:
    def clean(d):
        return {k: ("<required>" if v is REQUIRED else clean(v) if isinstance(v, dict) else v) for k, v in d.items()}

    exps = {k: clean(v) for k, v in SCHEMA.items()}
    for k in ("semilinear", "galerkin"):
        exps[k]["drift"] = {"kind": "<required: zero|constant|tanh|sigmoid|sin|nemytskii-tanh|nemytskii-sigmoid|nemytskii-sin>", "amplitude": 1.0}
    exps["measure"]["q"] = "{coef, exponent} power rule or explicit list"
    return {
        "schema_version": SCHEMA_VERSION,
        "top_level": {"schema_version": SCHEMA_VERSION, "experiment": sorted(SCHEMA), "seed": "<required uint64>", "output_dir": "out", "params": "per experiment"},
        "model_kinds": {"power": "gamma_n = gamma.coef n^gamma.exponent, beta_n likewise, n = 1..N", "heat": "Dirichlet Laplacian on [0, pi]^d, n_i <= cutoff"},
        "experiments": exps,
        "environment": {ou.THREADS_ENV: "worker threads for per-mode sampling (default 1)"},
    }


# ---------------------------------------------------------------------------
# building blocks


def _rule(obj, where) -> PowerLaw:
    if not isinstance(obj, dict) or set(obj) != {"coef", "exponent"}:
        raise ConfigError(f"{where} must be {{'coef': ..., 'exponent': ...}}")
    return PowerLaw(float(obj["coef"]), float(obj["exponent"]))


def _model(p: dict) -> ou.SpectralModel:
    law = StableLaw(float(p["alpha"]))
    if p["kind"] == "power":
        return ou.SpectralModel.power(law, int(p["N"]), _rule(p["gamma"], "gamma"), _rule(p["beta"], "beta"))
    if p["kind"] == "heat":
        return heat.build_heat_model(heat.HeatModelConfig(int(p["d"]), int(p["cutoff"]), p["beta_rule"]), law)
    raise ConfigError("model.kind must be 'power' or 'heat'")


def _vector(val, N, where) -> np.ndarray:
    arr = np.array(val, dtype=float)
    if arr.ndim == 0:
        return np.full(N, float(arr))
    if arr.shape != (N,):
        raise ConfigError(f"{where} must be a scalar or a list of length {N}")
    return arr


def _drift(spec: dict, model: ou.SpectralModel) -> semilinear.DriftSpec:
    kind, amp = spec["kind"], float(spec["amplitude"])
    N = model.N
    n = np.arange(1, N + 1)
    if kind == "zero":
        return semilinear.zero_drift()
    if kind == "constant":
        return semilinear.constant_drift(amp / n)
    if kind in ("tanh", "sigmoid", "sin"):
        return semilinear.coordinatewise_drift(kind, 1.0 / n, amp)
    if kind.startswith("nemytskii-"):
        if model.indices is None or model.indices.shape[1] != 1:
            raise ConfigError("Nemytskii drifts need a d=1 heat model")
        return semilinear.nemytskii_drift(kind.split("-", 1)[1], N, amp)
    raise ConfigError(f"unknown drift kind {kind!r}")


def _csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)] + [",".join(repr(float(v)) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Verdict):
        return o.value
    raise TypeError(f"not serializable: {type(o)}")


@dataclass
class Run:
    out: Path
    checks: list = field(default_factory=list)
    files: list = field(default_factory=list)

    def check(self, name: str, ok: bool, **detail) -> None:
        self.checks.append({"name": name, "pass": bool(ok), **detail})

    def csv(self, name, header, rows):
        _csv(self.out / name, header, rows)
        self.files.append(name)

    def json(self, name, obj):
        _json(self.out / name, obj)
        self.files.append(name)


# ---------------------------------------------------------------------------
# experiments: each takes (params, seed) and returns a runner; model
# construction happens before the runner so validation maps to status 2


def _exp_density(p, seed):
    law = StableLaw(float(p["alpha"]))
    x = np.linspace(float(p["x_min"]), float(p["x_max"]), int(p["n_points"]))

    def run(r: Run):
        pdf, cdf, score = law.density(x), law.cdf(x), law.score(x)
        r.csv("density.csv", ["x", "pdf", "cdf", "score"], zip(x, pdf, cdf, score))
        a = law.alpha
        if a in (1.0, 2.0):
            ref = 1.0 / (math.pi * (1.0 + x * x)) if a == 1.0 else np.exp(-x * x / 4.0) / (2.0 * math.sqrt(math.pi))
            err = float(np.max(np.abs(pdf - ref)))
            r.check("closed_form", err <= p["tolerance"], max_error=err)
        X = 4.0 * max(law.tail_switch, 1.0)
        core, _ = integrate.quad(law.density, -X, X, points=[0.0], limit=400, epsabs=1e-13, epsrel=1e-13)
        mass = core + 2.0 * float(law.sf(X))
        r.check("normalization", abs(mass - 1.0) <= p["norm_tolerance"], mass=mass)

    return run


def _exp_measure(p, seed):
    law = StableLaw(float(p["alpha"]))
    N = int(p["N"])
    if isinstance(p["q"], dict):
        rule = _rule(p["q"], "q")
        spec = product.ProductMeasureSpec.power(law, rule.coef, rule.exponent, N)
    else:
        spec = product.ProductMeasureSpec(law, p["q"])
    shifts = product.ShiftPair.finite(_vector(p["u"], spec.N, "u"), _vector(p["v"], spec.N, "v"))
    M = int(p["M"])

    def run(r: Run):
        member = product.membership_check(spec)
        equiv = product.equivalence_check(spec, shifts)
        H = product.hellinger_integral(spec, shifts)
        z = product.sample(spec, shifts.v, M, seed)
        ratio = product.density_ratio(z, spec, shifts)
        mean, se = float(ratio.mean()), float(ratio.std(ddof=1) / math.sqrt(M))
        root = np.sqrt(ratio)
        hmean, hse = float(root.mean()), float(root.std(ddof=1) / math.sqrt(M))
        r.json(
            "measure.json",
            {
                "membership": member.to_dict(),
                "equivalence": equiv.to_dict(),
                "hellinger_integral": H,
                "ratio_mean": mean,
                "ratio_stderr": se,
                "sqrt_ratio_mean": hmean,
                "sqrt_ratio_stderr": hse,
            },
        )
        r.check("membership", not member.fails, verdict=member.verdict.value)
        r.check("martingale", abs(mean - 1.0) <= 3.0 * se, mean=mean, stderr=se)
        r.check("hellinger_cross_check", abs(hmean - H) <= 3.0 * hse, estimate=hmean, exact=H)

    return run


def _grid(T, steps):
    if steps < 1 or T <= 0:
        raise ConfigError("need T > 0 and steps >= 1")
    return np.linspace(0.0, float(T), int(steps) + 1)


def _exp_ou(p, seed):
    model = _model(p["model"])
    x0 = _vector(p["x0"], model.N, "x0")
    times = _grid(p["T"], p["steps"])

    def run(r: Run):
        hyp = ou.hypothesis_basic_check(model)
        r.json("hypothesis.json", hyp.to_dict())
        r.check("hypothesis_basic", not hyp.fails, **hyp.to_dict())
        if hyp.fails:
            return
        rec = ou.simulate(model, x0, times, seed)
        rec.to_csv(r.out / "trajectory.csv")
        r.files.append("trajectory.csv")

    return run


def _exp_gradient(p, seed):
    model = _model(p["model"])
    x = _vector(p["x"], model.N, "x")
    k = int(p["direction"])
    if not 1 <= k <= model.N:
        raise ConfigError("direction must be a mode index in 1..N")
    h = np.zeros(model.N)
    h[k - 1] = 1.0
    t, M, eps = float(p["t"]), int(p["M"]), float(p["eps"])
    if t <= 0 or M < 2:
        raise ConfigError("need t > 0 and M >= 2")

    def f(z):
        return np.tanh(z[..., k - 1])

    def run(r: Run):
        est = ou.gradient_estimator(model, f, x, h, t, M, seed)
        cmp = ou.finite_difference_gradient(model, f, x, h, t, M, seed, eps)
        tol = max(3.0 * cmp.joint_stderr, 1e-3)
        r.json("gradient.json", {**est.to_dict(), "finite_difference": cmp.finite_difference, "joint_stderr": cmp.joint_stderr})
        r.check("finite_difference", abs(cmp.difference) <= tol, difference=cmp.difference, tolerance=tol)
        r.check("gradient_bound", est.within_bound, estimate=est.estimate, bound=est.bound)

    return run


def _semilinear_setup(p):
    model = _model(p["model"])
    problem = semilinear.SemilinearProblem(model, _drift(p["drift"], model))
    problem.drift.spot_check(model.N)
    return problem, _vector(p["x0"], model.N, "x0"), _grid(p["T"], p["steps"])


def _exp_semilinear(p, seed):
    problem, x0, times = _semilinear_setup(p)

    def run(r: Run):
        hyp = ou.hypothesis_basic_check(problem.model)
        r.check("hypothesis_basic", not hyp.fails, **hyp.to_dict())
        if hyp.fails:
            return
        rec = semilinear.semilinear_simulate(problem, x0, times, seed)
        rec.to_csv(r.out / "trajectory.csv")
        r.files.append("trajectory.csv")
        r.json("run.json", rec.meta)

    return run


def _exp_galerkin(p, seed):
    problem, x0, times = _semilinear_setup(p)
    ns = [int(n) for n in p["ns"]]
    if any(not 1 <= n <= problem.model.N for n in ns):
        raise ConfigError("every n must lie in 1..N")
    if problem.model.N not in ns:
        ns.append(problem.model.N)

    def run(r: Run):
        res = semilinear.galerkin_convergence_check(problem, x0, times, ns, seed)
        r.csv("galerkin.csv", ["n", "error"], [(n, e) for n, e in res["errors"].items()])
        r.check("non_increasing", res["non_increasing"])
        r.check("full_resolution_exact", res["errors"][problem.model.N] == 0.0)

    return run


def _exp_heat(p, seed):
    cfg = heat.HeatModelConfig(int(p["d"]), int(p["cutoff"]), p["beta_rule"])
    model = heat.build_heat_model(cfg, StableLaw(float(p["alpha"])))
    times = _grid(p["T"], p["steps"])
    n_pts = int(p["n_points"])

    def run(r: Run):
        r.csv("eigenvalues.csv", ["mode"] + [f"n_{i + 1}" for i in range(cfg.d)] + ["gamma"], [(j + 1, *idx, g) for j, (idx, g) in enumerate(zip(model.indices, model.gamma))])
        hyp = ou.hypothesis_basic_check(model)
        r.check("hypothesis_basic", not hyp.fails, **hyp.to_dict())
        if cfg.beta_rule is None:
            expo = heat.noise_space_exponent(cfg, model.alpha)
            r.json("noise_space_exponent.json", expo)
            r.check("exponent_diagnostic", expo["consistent"], critical_p=expo["critical_p"])
        if hyp.fails:
            return
        rec = ou.simulate(model, np.zeros(model.N), times, seed)
        rec.to_csv(r.out / "trajectory.csv")
        r.files.append("trajectory.csv")
        if cfg.d == 1:
            xi = np.linspace(0.0, math.pi, n_pts)
            xi[-1] = math.pi
            vals = heat.field_evaluate(rec, cfg, int(p["t_index"]), xi)
            heat.write_field_csv(r.out / "field.csv", xi, vals)
            r.files.append("field.csv")
            l2 = math.sqrt(float(integrate.trapezoid(vals**2, xi)))
            cn = float(np.linalg.norm(rec.coeffs[int(p["t_index"])]))
            r.check("boundary_zero", vals[0] == 0.0 and vals[-1] == 0.0)
            r.check("parseval", abs(l2 - cn) <= p["parseval_tolerance"] * cn, field_l2=l2, coeff_l2=cn)

    return run


def _exp_probes(p, seed):
    model = _model(p["model"])
    t, pw, M = float(p["t"]), float(p["p"]), int(p["M"])
    if not 0 < pw < model.alpha:
        raise ConfigError("need 0 < p < alpha")

    def run(r: Run):
        mom = ou.moment_bound_probe(model, t, pw, M, seed)
        table = ou.stochastic_continuity_probe(model, float(p["eps"]), p["h_grid"], p["t_grid"], M, seed)
        centers = np.zeros((2, model.N))
        centers[1, 0] = 5.0
        cov = ou.support_coverage_probe(model, np.zeros(model.N), t, centers, float(p["radius"]), M, seed)
        r.json("moment.json", mom.to_dict())
        r.csv("continuity.csv", ["h"] + [f"t={s!r}" for s in p["t_grid"]], [(h, *row) for h, row in zip(p["h_grid"], table)])
        r.json("coverage.json", cov.to_dict())
        r.check("moment_bound", mom.holds, ratio=mom.ratio)

    return run


EXPERIMENTS: dict[str, Callable] = {
    "density": _exp_density,
    "measure": _exp_measure,
    "ou": _exp_ou,
    "gradient": _exp_gradient,
    "semilinear": _exp_semilinear,
    "galerkin": _exp_galerkin,
    "heat": _exp_heat,
    "probes": _exp_probes,
}


# ---------------------------------------------------------------------------
# run / verify


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def execute(config: dict, out: Path) -> tuple[int, dict]:
    """Run a resolved config into ``out``; always writes ``manifest.json``."""
    out.mkdir(parents=True, exist_ok=True)
    run = Run(out)
    start = time.perf_counter()
    status, error = EXIT_OK, None
    try:
        runner = EXPERIMENTS[config["experiment"]](config["params"], config["seed"])
    except (ConfigError, ValueError, TypeError, KeyError) as exc:
        status, error = EXIT_CONFIG, f"{type(exc).__name__}: {exc}"
        runner = None
    if runner is not None:
        try:
            runner(run)
        except Exception as exc:  # noqa: BLE001 - any failure inside an experiment is a runtime failure
            status, error = EXIT_RUNTIME, "".join(traceback.format_exception_only(type(exc), exc)).strip()
        else:
            if not all(c["pass"] for c in run.checks):
                status = EXIT_CHECK
    manifest = {
        "config": config,
        "code_version": __version__,
        "wall_time_s": time.perf_counter() - start,
        "status": status,
        "error": error,
        "checks": run.checks,
        "files": {name: _sha256(out / name) for name in run.files},
    }
    _json(out / "manifest.json", manifest)
    return status, manifest


def _numbers(path: Path):
    text = path.read_text()
    if path.suffix == ".json":
        return json.loads(text)
    rows = [line.split(",") for line in text.strip().splitlines()]
    return [rows[0]] + [[float(v) for v in row] for row in rows[1:]]


def _numeric_equal(a, b, rtol=1e-9, atol=1e-12) -> bool:
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_numeric_equal(a[k], b[k], rtol, atol) for k in a)
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(_numeric_equal(x, y, rtol, atol) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        try:
            return math.isclose(float(a), float(b), rel_tol=rtol, abs_tol=atol) or (math.isnan(float(a)) and math.isnan(float(b)))
        except (TypeError, ValueError):
            return False
    return a == b


def verify(manifest_path: Path) -> tuple[int, dict]:
    """Re-run the manifest's config in a scratch directory and compare every recorded file."""
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    missing = [name for name in manifest.get("files", {}) if not (base / name).is_file()]
    report = {"files": {}, "missing": missing}
    if missing:
        return EXIT_CONFIG, report
    config = resolve_config({k: v for k, v in manifest["config"].items()})
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        execute(config, tmp)
        for name in manifest["files"]:
            old, new = base / name, tmp / name
            if not new.is_file():
                verdict = "divergent"
            elif old.read_bytes() == new.read_bytes():
                verdict = "byte-identical"
            else:
                try:
                    verdict = "numerically-equal" if _numeric_equal(_numbers(old), _numbers(new)) else "divergent"
                except (ValueError, json.JSONDecodeError):
                    verdict = "divergent"
            report["files"][name] = verdict
    status = EXIT_CHECK if any(v == "divergent" for v in report["files"].values()) else EXIT_OK
    return status, report


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="stable-spde", description="Stable-noise SPDE experiment runner.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--output-dir", type=Path, default=None, help="override the output directory")
    p_ver = sub.add_parser("verify", help="re-run a manifest and compare outputs")
    p_ver.add_argument("manifest", type=Path)
    sub.add_parser("schema", help="print the config schema")
    args = parser.parse_args(argv)

    if args.command == "schema":
        print(json.dumps(schema_document(), indent=2))
        return EXIT_OK

    if args.command == "verify":
        if not args.manifest.is_file():
            print(f"error: manifest {args.manifest} not found", file=sys.stderr)
            return EXIT_CONFIG
        try:
            status, report = verify(args.manifest)
        except (ConfigError, json.JSONDecodeError, KeyError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for name in report["missing"]:
            print(f"{name}: missing")
        for name, verdict in report["files"].items():
            print(f"{name}: {verdict}")
        return status

    try:
        raw = json.loads(args.config.read_text())
        config = resolve_config(raw, args.seed)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        out = args.output_dir or (args.config.parent / "out")
        out.mkdir(parents=True, exist_ok=True)
        _json(out / "manifest.json", {"config": None, "code_version": __version__, "status": EXIT_CONFIG, "error": str(exc), "checks": [], "files": {}})
        return EXIT_CONFIG
    out = args.output_dir or (args.config.parent / config["output_dir"])
    status, manifest = execute(config, out)
    for c in manifest["checks"]:
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['name']}")
    if manifest["error"]:
        print(f"error: {manifest['error']}", file=sys.stderr)
    print(f"manifest: {out / 'manifest.json'}")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
