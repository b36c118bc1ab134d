"""Scenario files, the check registry and the ``mmlab`` command.

A scenario is a TOML document::

    name = "demo"
    seed = 0
    output = "reports/demo"

    [space]
    builder = "two_point"

    [[experiments]]
    check = "intrinsic_distance"
    params = { x = 0, y = 1, expected = 1.0 }

Experiments may carry their own ``[experiments.space]`` table. Reports are
written as ``NN_<check>.json`` / ``.csv`` plus ``summary.json``; the exit
status is 0 iff every check passes, 1 if some check fails and 2 if an
experiment raised.
"""

from __future__ import annotations

import argparse
import inspect
import logging
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np
import tomli
import tomli_w

from . import studies
from .builders import BUILDERS, build_space
from .dynamic import (heat_curve_speed_bound, sandwich_check, we_distance, we_dual,
                      we_dual_l1)
from .flows import (be_best_K, contractivity_check, functional_inequalities,
                    jko_convergence_report)
from .heat import SpectralSemigroup, heat_apply, heat_implicit
from .intrinsic import intrinsic_distance, intrinsic_distance_matrix
from .io import dumps
from .report import Report
from .space import (FiniteEnergySpace, energy, gamma, laplacian, random_density,
                    random_space)
from .transport import ExtendedDistanceMatrix, kantorovich

log = logging.getLogger("mmlab")


class ScenarioError(ValueError):
    """Schema violation; the message names the file, line and field."""


# -- scenario model ---------------------------------------------------------------------

@dataclass
class SpaceSpec:
    builder: str
    params: dict = field(default_factory=dict)


@dataclass
class Experiment:
    check: str
    params: dict = field(default_factory=dict)
    space: SpaceSpec | None = None


@dataclass
class Scenario:
    name: str
    space: SpaceSpec | None = None
    experiments: list[Experiment] = field(default_factory=list)
    output: str = "reports"
    seed: int = 0

    def to_dict(self) -> dict:
        out = {"name": self.name, "seed": self.seed, "output": self.output}
        if self.space is not None:
            out["space"] = asdict(self.space)
        exps = []
        for e in self.experiments:
            d = {"check": e.check, "params": e.params}
            if e.space is not None:
                d["space"] = asdict(e.space)
            exps.append(d)
        out["experiments"] = exps
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_toml(cls, text: str, source: str = "<scenario>") -> "Scenario":
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ScenarioError(f"{source}: {exc}") from None
        return _parse_scenario(data, text, source)

    @classmethod
    def load(cls, path) -> "Scenario":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ScenarioError(f"{path}: cannot read scenario ({exc.strerror})") from None
        return cls.from_toml(text, str(path))


def _line_of(text: str, pattern: str) -> int | None:
    rx = re.compile(pattern)
    for k, line in enumerate(text.splitlines(), 1):
        if rx.search(line):
            return k
    return None


def _fail(source: str, text: str, where: str, msg: str, pattern: str | None = None):
    line = _line_of(text, pattern) if pattern else None
    loc = f"{source}:{line}" if line else source
    raise ScenarioError(f"{loc}: {where}: {msg}")


_TOP_KEYS = {"name", "seed", "output", "space", "experiments"}


def _parse_space(raw, source, text, where) -> SpaceSpec:
    if not isinstance(raw, dict):
        _fail(source, text, where, "must be a table")
    unknown = set(raw) - {"builder", "params"}
    if unknown:
        _fail(source, text, where, f"unknown keys {sorted(unknown)}")
    builder = raw.get("builder")
    if builder not in BUILDERS:
        _fail(source, text, f"{where}.builder",
              f"unknown builder {builder!r}; choose from {sorted(BUILDERS)}",
              rf"builder\s*=\s*[\"']{re.escape(str(builder))}[\"']")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        _fail(source, text, f"{where}.params", "must be a table")
    return SpaceSpec(builder, dict(params))


def _parse_scenario(data: dict, text: str, source: str) -> Scenario:
    unknown = set(data) - _TOP_KEYS
    if unknown:
        key = sorted(unknown)[0]
        _fail(source, text, key, "unknown top-level key", rf"^\s*{re.escape(key)}\s*=")
    name = data.get("name", Path(source).stem)
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        _fail(source, text, "seed", "must be a nonnegative integer", r"^\s*seed\s*=")
    output = data.get("output", f"reports/{name}")
    space = _parse_space(data["space"], source, text, "space") if "space" in data else None
    exps = []
    raw_exps = data.get("experiments", [])
    if not isinstance(raw_exps, list):
        _fail(source, text, "experiments", "must be an array of tables")
    for k, raw in enumerate(raw_exps):
        where = f"experiments[{k}]"
        if not isinstance(raw, dict):
            _fail(source, text, where, "must be a table")
        extra = set(raw) - {"check", "params", "space"}
        if extra:
            _fail(source, text, where, f"unknown keys {sorted(extra)}")
        check = raw.get("check")
        if check not in CHECKS:
            _fail(source, text, f"{where}.check",
                  f"unknown check {check!r}; choose from {sorted(CHECKS)}",
                  rf"check\s*=\s*[\"']{re.escape(str(check))}[\"']")
        params = raw.get("params", {})
        if not isinstance(params, dict):
            _fail(source, text, f"{where}.params", "must be a table")
        bad = set(params) - CHECKS[check].parameters
        if bad:
            key = sorted(bad)[0]
            _fail(source, text, f"{where}.params.{key}",
                  f"unknown parameter for {check!r}; accepted: {sorted(CHECKS[check].parameters)}",
                  rf"\b{re.escape(key)}\s*=")
        espace = _parse_space(raw["space"], source, text, f"{where}.space") \
            if "space" in raw else None
        if espace is None and space is None and CHECKS[check].needs_space:
            _fail(source, text, where, "no space given (top-level or per experiment)")
        exps.append(Experiment(check, dict(params), espace))
    return Scenario(str(name), space, exps, str(output), seed)


# -- check registry ---------------------------------------------------------------------

@dataclass
class Context:
    """Per-experiment inputs: a read-only space and a private RNG."""

    space: FiniteEnergySpace | None
    rng: np.random.Generator
    seed: int

    @cached_property
    def semigroup(self) -> SpectralSemigroup:
        return SpectralSemigroup.of(self.space)


@dataclass(frozen=True)
class Check:
    fn: Callable[..., Report]
    needs_space: bool = True

    @property
    def parameters(self) -> set[str]:
        return set(list(inspect.signature(self.fn).parameters)[1:])


CHECKS: dict[str, Check] = {}


def register(name: str, needs_space: bool = True):
    def deco(fn):
        CHECKS[name] = Check(fn, needs_space)
        return fn
    return deco


def density(ctx: Context, spec) -> np.ndarray:
    """Interpret a density spec.

    Accepted forms: a list of values (rescaled to unit mass), ``"uniform"``,
    ``"random"``, ``{point = i}`` (all mass at ``i``) and, on ``ou_grid``
    spaces, ``{gaussian = [mean, std]}``.
    """
    sp = ctx.space
    if isinstance(spec, str):
        if spec == "uniform":
            return np.ones(sp.n)
        if spec == "random":
            return random_density(sp, ctx.rng)
        raise ValueError(f"unknown density {spec!r}")
    if isinstance(spec, dict):
        if "point" in spec:
            rho = np.zeros(sp.n)
            rho[int(spec["point"])] = 1.0 / sp.m[int(spec["point"])]
            return rho
        if "gaussian" in spec:
            return studies.gaussian_density(sp, *spec["gaussian"])
        raise ValueError(f"unknown density table {spec!r}")
    rho = np.asarray(spec, dtype=float)
    if rho.shape != (sp.n,) or np.any(rho < 0) or not np.any(rho > 0):
        raise ValueError(f"density must be {sp.n} nonnegative values, not all zero")
    return rho / float(sp.m @ rho)


def _closeness(check, params, iv, expected, tol, extra=None) -> Report:
    """Residual ``max(|lower - expected|, |upper - expected|)`` or the width."""
    extra = dict(extra or {}, lower=iv.lower, upper=iv.upper, flagged=iv.flagged)
    if expected is None:
        res = 0.0 if iv.lower == iv.upper else iv.upper - iv.lower
    elif math.isinf(expected):
        res = 0.0 if (math.isinf(iv.lower) and math.isinf(iv.upper)) else math.inf
    else:
        res = max(abs(iv.lower - expected), abs(iv.upper - expected))
    return Report(check, params, ["value"], [res], tol, extra=extra)


@register("carre_du_champ")
def _check_carre(ctx, samples=20, tol=1e-12):
    """``2 Gamma(f, g) = Delta(fg) - f Delta g - g Delta f`` (relative error)."""
    sp = ctx.space
    res = []
    for _ in range(samples):
        f, g = ctx.rng.normal(size=(2, sp.n))
        lhs = 2 * gamma(sp, f, g)
        rhs = laplacian(sp, f * g) - f * laplacian(sp, g) - g * laplacian(sp, f)
        scale = max(np.abs(lhs).max(), np.abs(rhs).max(), 1e-300)
        res.append(float(np.abs(lhs - rhs).max() / scale))
    return Report("carre_du_champ", {"samples": samples}, list(range(samples)), res, tol)


@register("integration_by_parts")
def _check_ibp(ctx, samples=20, tol=1e-12):
    """``int (Delta f) g dm = -E(f, g)`` (relative error)."""
    sp = ctx.space
    res = []
    for _ in range(samples):
        f, g = ctx.rng.normal(size=(2, sp.n))
        a = float(sp.m @ (laplacian(sp, f) * g))
        b = -energy(sp, f, g)
        res.append(abs(a - b) / max(abs(a), abs(b), 1e-300))
    return Report("integration_by_parts", {"samples": samples}, list(range(samples)),
                  res, tol)


@register("intrinsic_distance")
def _check_dE(ctx, x=0, y=1, expected=None, tol=1e-8):
    iv = intrinsic_distance(ctx.space, int(x), int(y))
    return _closeness("intrinsic_distance", {"x": x, "y": y, "expected": expected},
                      iv, expected, tol)


@register("kantorovich")
def _check_kantorovich(ctx, rho0=None, rho1=None, power=2, expected=None, tol=1e-8):
    """Transport cost over the certified bounds of ``d_E``."""
    from .certify import CertifiedInterval
    sp = ctx.space
    r0, r1 = density(ctx, rho0), density(ctx, rho1)
    lo, up = intrinsic_distance_matrix(sp)
    results = [kantorovich(ExtendedDistanceMatrix(d, True, check_triangle=False),
                           sp.m * r0, sp.m * r1, int(power)) for d in (lo, up)]
    iv = CertifiedInterval(results[0].distance, results[1].distance)
    return _closeness("kantorovich", {"power": power, "expected": expected}, iv, expected,
                      tol, extra={"duality_gap": max(r.gap for r in results)})


@register("we_distance")
def _check_we(ctx, rho0=None, rho1=None, N=8, restarts=2, expected=None, tol=1e-3):
    iv = we_distance(ctx.space, density(ctx, rho0), density(ctx, rho1), N=int(N),
                     restarts=int(restarts), seed=ctx.seed)
    return _closeness("we_distance", {"N": N, "expected": expected}, iv, expected, tol)


@register("we_dual")
def _check_we_dual(ctx, rho0=None, rho1=None, N=8, delta=1.0, expected=None, tol=2e-3):
    """Lower bound of the dual distance against ``expected`` (one-sided)."""
    iv = we_dual(ctx.space, density(ctx, rho0), density(ctx, rho1), N=int(N), delta=delta)
    res = [abs(iv.lower - expected)] if expected is not None else [0.0]
    return Report("we_dual", {"N": N, "delta": delta, "expected": expected}, ["lower"],
                  res, tol, extra={"lower": iv.lower, "flagged": iv.flagged})


@register("we_dual_l1")
def _check_we_dual_l1(ctx, rho0=None, rho1=None, expected=None, tol=1e-8):
    iv = we_dual_l1(ctx.space, density(ctx, rho0), density(ctx, rho1))
    return _closeness("we_dual_l1", {"expected": expected}, iv, expected, tol)


def _be_samples(ctx, samples):
    if samples == "ou":
        return studies.ou_test_functions(ctx.space)
    return ctx.rng.normal(size=(int(samples), ctx.space.n))


@register("be_best_K")
def _check_be(ctx, samples=8, times=(0.05, 0.1, 0.5, 1.0), expected=None, tol=1e-6):
    K = be_best_K(ctx.space, ctx.semigroup, _be_samples(ctx, samples), list(times))
    res = [abs(K - expected)] if expected is not None else [0.0]
    return Report("be_best_K", {"samples": samples, "times": list(times),
                                "expected": expected}, ["K"], res, tol, extra={"K": K})


@register("contractivity")
def _check_contractivity(ctx, rho0=None, rho1=None, K=0.0, times=(0.1, 0.25, 0.5),
                         selector="W_E", N=8, tol=1e-3, exact=False):
    """Contraction at rate ``K``; with ``exact`` the observed ratio must equal ``e^{-Kt}``."""
    rep = contractivity_check(ctx.space, ctx.semigroup, selector, density(ctx, rho0),
                              density(ctx, rho1), K, list(times), N=int(N))
    if exact and rep.residuals:
        ratio_err = [abs(r - math.exp(-K * t))
                     for r, t in zip(rep.extra["ratio_upper"], rep.grid)]
        rep = Report(rep.check, dict(rep.params, exact=True),
                     rep.grid + [f"ratio@{t}" for t in rep.grid],
                     rep.residuals + ratio_err, tol, extra=rep.extra)
    return rep


@register("entropy_dissipation")
def _check_dissipation(ctx, rho0=None, times=(0.2, 0.5, 1.0),
                       dts=(0.04, 0.02, 0.01, 0.005), min_order=1.8):
    return studies.dissipation_order(ctx.semigroup, density(ctx, rho0), list(times),
                                     list(dts), min_order)


@register("heat_implicit")
def _check_heat_implicit(ctx, f=None, t=0.5, steps=(8, 16, 32, 64)):
    """Implicit Euler against spectral synthesis; the error must decrease."""
    sp = ctx.space
    f = ctx.rng.normal(size=sp.n) if f is None else np.asarray(f, float)
    exact = heat_apply(ctx.semigroup, f, t)
    errs = [float(np.abs(heat_implicit(sp, f, t, int(s)) - exact).max()) for s in steps]
    return studies._decreasing("heat_implicit", {"t": t}, list(steps), errs,
                               {"steps": list(steps)})


@register("heat_curve_speed")
def _check_heat_speed(ctx, rho0=None, times=(0.1, 0.2, 0.3, 0.4, 0.5), tol=1e-9):
    return heat_curve_speed_bound(ctx.space, ctx.semigroup, density(ctx, rho0),
                                  list(times), tol)


@register("hopf_cole")
def _check_hopf_cole(ctx, trials=20, t=0.5, steps=40):
    return studies.hopf_cole_trials(ctx.space, ctx.rng, int(trials), t, int(steps))


@register("sandwich")
def _check_sandwich(ctx, rho0="random", rho1="random", N=8, tol=1e-3):
    return sandwich_check(ctx.space, density(ctx, rho0), density(ctx, rho1), int(N), tol,
                          seed=ctx.seed)


@register("random_sandwich", needs_space=False)
def _check_random_sandwich(ctx, instances=20, n_max=8, N=8, tol=1e-3):
    """Ordering of the three transport distances on random connected spaces."""
    grid, res, extra = [], [], []
    for k in range(int(instances)):
        n = int(ctx.rng.integers(3, int(n_max) + 1))
        sp = random_space(ctx.rng, n)
        rep = sandwich_check(sp, random_density(sp, ctx.rng), random_density(sp, ctx.rng),
                             int(N), tol, seed=ctx.seed)
        grid += [f"{g}[{k}]" for g in rep.grid]
        res += rep.residuals
        extra.append(dict(rep.extra, n=n))
    return Report("random_sandwich", {"instances": instances, "N": N}, grid, res,
                  2 * tol, extra={"instances": extra})


@register("jko")
def _check_jko(ctx, rho0=None, taus=(0.1, 0.05, 0.025, 0.0125), T=0.5, metric="linear"):
    return jko_convergence_report(ctx.space, ctx.semigroup, density(ctx, rho0),
                                  list(taus), T, metric)


@register("functional_inequalities")
def _check_functional(ctx, K=0.0, pairs=20, varrho=0.1, samples=5, N=8,
                      expected_c_P=None, be_samples=None):
    sp = ctx.space
    mus = [density(ctx, "random") for _ in range(int(samples))]
    if sp.name.startswith("ou_grid("):
        mus = [studies.gaussian_density(sp, mean, std)
               for mean, std in ((1.0, 0.8), (-0.5, 0.9), (0.3, 1.2), (1.5, 0.6),
                                 (-1.0, 1.0))][:int(samples)]
    bes = _be_samples(ctx, be_samples) if be_samples is not None else None
    rep = functional_inequalities(sp, ctx.semigroup, K, ctx.rng, int(pairs), varrho,
                                  samples=mus, N=int(N), be_samples=bes)
    if expected_c_P is not None:
        rep = Report(rep.check, dict(rep.params, expected_c_P=expected_c_P),
                     rep.grid + ["c_P"],
                     rep.residuals + [abs(rep.extra["c_P"] - expected_c_P)],
                     rep.tolerance, extra=rep.extra)
    return rep


@register("mehler_refinement", needs_space=False)
def _check_mehler(ctx, L=4.0, hs=studies.DEFAULT_HS, t=0.1):
    return studies.mehler_refinement(L, list(hs), t)


@register("be_refinement", needs_space=False)
def _check_be_ref(ctx, L=4.0, hs=studies.DEFAULT_HS,
                  times=(0.01, 0.05, 0.1, 0.25, 0.5, 1.0), band=(0.8, 1.2)):
    return studies.be_refinement(L, list(hs), list(times), tuple(band))


@register("evi_refinement", needs_space=False)
def _check_evi_ref(ctx, L=4.0, hs=studies.DEFAULT_HS, K=1.0,
                   times=(0.05, 0.1, 0.2, 0.4), N=8):
    return studies.evi_refinement(L, list(hs), K, list(times), int(N))


@register("fisher_defect_refinement", needs_space=False)
def _check_fisher_ref(ctx, L=4.0, hs=studies.DEFAULT_HS, bump=(0.5, 0.7)):
    return studies.fisher_defect_refinement(L, list(hs), tuple(bump))


# -- running -------------------------------------------------------------------------------

@dataclass
class Outcome:
    index: int
    check: str
    report: Report | None
    error: str | None = None


def _run_one(args) -> Outcome:
    index, exp, space_spec, seed = args
    sp = build_space(space_spec.builder, space_spec.params) if space_spec else None
    rng = np.random.default_rng([seed, index])
    ctx = Context(sp, rng, seed)
    try:
        rep = CHECKS[exp.check].fn(ctx, **exp.params)
    except Exception as exc:  # solver failures become partial reports
        log.error("experiment %d (%s) failed: %s", index, exp.check, exc)
        return Outcome(index, exp.check, None, f"{type(exc).__name__}: {exc}")
    if space_spec is not None:
        rep.params = dict(rep.params, space=asdict(space_spec))
    return Outcome(index, exp.check, rep)


def run_scenario(scenario: Scenario | str | Path, out: str | Path | None = None,
                 seed: int | None = None, jobs: int = 1) -> tuple[int, list[Outcome]]:
    """Run every experiment and write JSON/CSV reports; returns (exit code, outcomes)."""
    if not isinstance(scenario, Scenario):
        scenario = Scenario.load(scenario)
    seed = scenario.seed if seed is None else seed
    out = Path(out if out is not None else scenario.output)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(k, e, e.space or scenario.space, seed) for k, e in enumerate(scenario.experiments)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one, tasks))
    else:
        outcomes = [_run_one(t) for t in tasks]
    summary = []
    for o in outcomes:  # report writing is serialized and ordered
        stem = out / f"{o.index:02d}_{o.check}"
        if o.report is not None:
            (stem.with_suffix(".json")).write_text(dumps(o.report.to_dict()) + "\n")
            (stem.with_suffix(".csv")).write_text(o.report.to_csv())
            log.info(o.report.line())
            summary.append({"index": o.index, "check": o.check, "pass": o.report.passed,
                            "max_violation": o.report.max_violation})
        else:
            summary.append({"index": o.index, "check": o.check, "pass": False,
                            "error": o.error})
    (out / "summary.json").write_text(
        dumps({"scenario": scenario.name, "seed": seed, "reports": summary}) + "\n")
    if any(o.error for o in outcomes):
        return 2, outcomes
    return (0 if all(o.report.passed for o in outcomes) else 1), outcomes


def bundled_scenarios() -> dict[str, Path]:
    root = resources.files("mmlab") / "scenarios"
    return {Path(p.name).stem: Path(str(p)) for p in root.iterdir()
            if p.name.endswith(".toml")}


def resolve_scenario(arg: str) -> Path:
    path = Path(arg)
    if path.exists():
        return path
    bundled = bundled_scenarios()
    if arg in bundled:
        return bundled[arg]
    raise ScenarioError(f"{arg}: no such file or bundled scenario "
                        f"(bundled: {sorted(bundled)})")


def _parse_value(text: str):
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def _parse_pairs(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ScenarioError(f"parameter {item!r} is not of the form key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = _parse_value(v.strip())
    return out


def _setup_logging():
    level = os.environ.get("MMLAB_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(prog="mmlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file or bundled scenario")
    run.add_argument("scenario")
    run.add_argument("--out", help="report directory (default: the scenario's output)")
    run.add_argument("--seed", type=int)
    run.add_argument("--jobs", type=int, default=1)
    chk = sub.add_parser("check", help="run one check and print its report")
    chk.add_argument("name", choices=sorted(CHECKS))
    chk.add_argument("--space", help="space builder name")
    chk.add_argument("--space-param", action="append", default=[], metavar="KEY=VALUE")
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("params", nargs="*", metavar="KEY=VALUE")
    sub.add_parser("list", help="list builders, checks and bundled scenarios")
    args, rest = parser.parse_known_args(argv)
    if rest:
        # key=value pairs may follow options; argparse leaves those over
        if args.command != "check" or any(r.startswith("-") or "=" not in r for r in rest):
            parser.error(f"unrecognized arguments: {' '.join(rest)}")
        args.params = list(args.params) + rest

    try:
        if args.command == "run":
            code, outcomes = run_scenario(resolve_scenario(args.scenario), args.out,
                                          args.seed, args.jobs)
            for o in outcomes:
                print(o.report.line() if o.report else f"[ERROR] {o.check}: {o.error}")
            return code
        if args.command == "check":
            if CHECKS[args.name].needs_space and not args.space:
                parser.error(f"check {args.name!r} needs --space")
            spec = SpaceSpec(args.space, _parse_pairs(args.space_param)) if args.space else None
            if spec and spec.builder not in BUILDERS:
                parser.error(f"unknown space {spec.builder!r}; choose from {sorted(BUILDERS)}")
            o = _run_one((0, Experiment(args.name, _parse_pairs(args.params)), spec, args.seed))
            if o.report is None:
                print(f"[ERROR] {o.check}: {o.error}", file=sys.stderr)
                return 2
            print(o.report.line())
            print(dumps(o.report.to_dict()))
            return 0 if o.report.passed else 1
        print("builders:", " ".join(sorted(BUILDERS)))
        print("checks:", " ".join(sorted(CHECKS)))
        print("scenarios:", " ".join(sorted(bundled_scenarios())))
        return 0
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
