"""Command-line experiment runner.

``pxlab run --config cfg.json [--out DIR] [--seed N]`` executes the tasks of a
JSON run configuration in order and writes ``solution.csv``,
``certificate.json``, ``checks/<task>.csv`` and ``summary.json``.

Exit status: 0 all assertions pass, 1 an assertion failed, 2 configuration or
precondition error, 3 solver divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .degiorgi import (
    CertificateError,
    IterationParams,
    PartitionError,
    PreconditionError,
    check_energy_estimate,
    compute_bound_certificate,
    iterate_lemma,
    kappa_floor,
    supersolution_certificate,
    threshold_sweep,
)
from .exponents import check_admissible, check_log_holder, validate_structure
from .grid import SampledField, SpaceTimeGrid, BoxDomain, luxemburg_norm, write_field_csv
from .inequalities import (
    CORPUS_VERSION,
    InadmissibleExponents,
    InterpolationSetup,
    check_gn,
    check_parabolic_embedding,
    embedding_corpus,
    empirical_embedding_constant,
    spatial_corpus,
    supercritical_probe,
)
from .problems import ConfigError, load_problem, problem_from_dict
from .smoothing import mollify_space, steklov_field, time_average
from .solver import SolverConfig, SolverDivergence, solve

__all__ = ["main", "run", "RunConfig", "TASKS"]

TASKS = ("solve", "certify", "check-energy", "check-gn", "check-embeddings", "check-smoothing", "iterate", "validate-structure")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


@dataclass
class RunConfig:
    problem: object
    solver: SolverConfig
    tasks: list
    options: dict = field(default_factory=dict)
    seed: int = 0
    base: Path = Path(".")

    @classmethod
    def from_dict(cls, d: dict, base: Path = Path("."), seed: int | None = None) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("run configuration must be a JSON object")
        tasks = d.get("tasks")
        if not tasks or not isinstance(tasks, list):
            raise ConfigError("'tasks' must be a non-empty list")
        bad = [t for t in tasks if t not in TASKS]
        if bad:
            raise ConfigError(f"unknown tasks {bad}; choose from {list(TASKS)}")
        src = d.get("problem", {"builtin": "heat-neumann"})
        if isinstance(src, str):
            path = (base / src) if not Path(src).is_absolute() else Path(src)
            if not path.exists():
                raise ConfigError(f"problem file {path} does not exist")
            problem = load_problem(path)
        elif isinstance(src, dict):
            problem = problem_from_dict(src)
        else:
            raise ConfigError("'problem' must be a path or an object")
        try:
            solver = SolverConfig(**d.get("solver", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad solver settings: {exc}") from None
        opts = {k: d.get(k, {}) for k in ("check_energy", "check_gn", "check_embeddings", "check_smoothing", "iterate", "certify", "validate_structure")}
        return cls(problem, solver, list(tasks), opts, int(d.get("seed", 0) if seed is None else seed), base)


# --------------------------------------------------------------------- helpers


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_rows(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([_fmt(v) for v in r])


class _Run:
    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg, self.out = cfg, out
        self.solution = None
        self.assertions: dict[str, bool] = {}
        self.info: dict[str, object] = {}

    def need_solution(self):
        if self.solution is None:
            self.task_solve()
        return self.solution

    def check(self, name: str, ok) -> None:
        self.assertions[name] = bool(ok)

    # ---- tasks

    def task_solve(self):
        spec = self.cfg.problem
        sol = solve(spec, self.cfg.solver)
        self.solution = sol
        write_field_csv(self.out / "solution.csv", sol.u)
        d = sol.diagnostics
        self.info["solve"] = {
            "grid": sol.grid.to_dict(),
            "steps": len(d),
            "max_residual": max((s.residual for s in d), default=0.0),
            "fallback_steps": sum(s.fallback_steps for s in d),
            "u_max": float(sol.values.max()),
            "u_min": float(sol.values.min()),
        }
        self.check("solve.converged", all(s.converged for s in d))

    def task_certify(self):
        sol, spec = self.need_solution(), self.cfg.problem
        lh = bool(self.cfg.options["certify"].get("log_holder", True))
        up = compute_bound_certificate(sol, spec, log_holder=lh)
        lo = supersolution_certificate(sol, spec, log_holder=lh)
        doc = {"upper": up.to_dict(), "lower": lo.to_dict()}
        with open(self.out / "certificate.json", "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.check("certify.upper_sound", up.sound)
        self.check("certify.lower_sound", lo.sound)
        self.check("certify.finite", up.finite and lo.finite)

    def task_check_energy(self):
        sol, spec = self.need_solution(), self.cfg.problem
        o = self.cfg.options["check_energy"]
        rows = []
        for mode in ("sub", "super"):
            floor = kappa_floor(sol.u, mode)
            if "kappas" in o:
                ks = [float(k) for k in o["kappas"]]
            else:
                top = float((-sol.values if mode == "super" else sol.values).max())
                ks = np.linspace(floor, max(floor, top), int(o.get("n_kappas", 10)))
            for c in check_energy_estimate(sol, spec, ks, o.get("T0"), mode):
                rows.append((mode, c.kappa, c.lhs, c.rhs, c.margin, c.holds))
        write_rows(self.out / "checks" / "check-energy.csv", ["mode", "kappa", "lhs", "rhs", "margin", "holds"], rows)
        self.check("check-energy", all(r[-1] for r in rows))

    def task_check_gn(self):
        rows = gn_rows(**self.cfg.options["check_gn"])
        write_rows(self.out / "checks" / "check-gn.csv", GN_HEADER, rows)
        self.check("check-gn", all(r[-1] for r in rows))

    def task_check_embeddings(self):
        rows, probes = embedding_rows(**self.cfg.options["check_embeddings"])
        write_rows(self.out / "checks" / "check-embeddings.csv", EMB_HEADER, rows)
        write_rows(self.out / "checks" / "check-embeddings-probe.csv", PROBE_HEADER, probes)
        self.check("check-embeddings.inequalities", all(r[-1] for r in rows))
        self.check("check-embeddings.probe", all(r[-1] for r in probes))

    def task_check_smoothing(self):
        rows = smoothing_rows(seed=self.cfg.seed, **self.cfg.options["check_smoothing"])
        write_rows(self.out / "checks" / "check-smoothing.csv", ["check", "parameter", "value", "passed"], rows)
        self.check("check-smoothing", all(r[-1] for r in rows))

    def task_iterate(self):
        o = self.cfg.options["iterate"]
        rows = []
        for P, which, y0, r in threshold_sweep(int(o.get("n_samples", 200)), self.cfg.seed, int(o.get("n_max", 60))):
            rows.append((P.K, P.b, P.delta1, P.delta2, which, y0, r.verdict, r.reached_one, r.decay_holds))
        for case in o.get("cases", []):
            try:
                P = IterationParams(float(case["K"]), float(case["b"]), float(case["delta1"]), float(case["delta2"]))
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"bad iterate case {case}: {exc}") from None
            r = iterate_lemma(float(case["Y0"]), P, int(o.get("n_max", 60)))
            rows.append((P.K, P.b, P.delta1, P.delta2, "given", float(case["Y0"]), r.verdict, r.reached_one, r.decay_holds))
        write_rows(
            self.out / "checks" / "iterate.csv",
            ["K", "b", "delta1", "delta2", "threshold", "Y0", "verdict", "reached_one", "decay_holds"],
            rows,
        )
        sweep = [r for r in rows if r[4] != "given"]
        self.check("iterate.sweep", all(r[6] == "converges" and r[7] and r[8] for r in sweep))

    def task_validate_structure(self):
        spec = self.cfg.problem
        grid = self.cfg.solver.grid(spec)
        H = spec.hypotheses(grid)
        rep = validate_structure(spec.A, spec.B, spec.C, H, seed=self.cfg.seed)
        rows = [(name, c["passed"], c["worst_margin"]) for name, c in sorted(rep.conditions.items())]
        adm = check_admissible(H, spec.N) if spec.N >= 2 else None
        if adm is not None:
            rows += [(f"admissible:{k}", v is None, "") for k, v in adm.failures.items()]
        if not spec.time_independent_p:
            lh = check_log_holder(H.p, mode="fit")
            rows.append(("log-holder-fit", True, lh.k_fit))
        write_rows(self.out / "checks" / "validate-structure.csv", ["condition", "passed", "worst_margin"], rows)
        self.check("validate-structure", all(r[1] for r in rows))


# --------------------------------------------------------------------- shared tables

GN_HEADER = ["function", "side", "N", "p", "s", "q", "alpha", "lhs", "w1p", "ls", "ratio", "verdict"]
DEFAULT_GN_SETUPS = ((2, 2.0, 2.0, 4.0, "interior"), (2, 2.0, 2.0, 3.0, "boundary"), (2, 3.0, 2.0, 5.0, "interior"), (2, 1.5, 2.0, 2.5, "boundary"))


def gn_rows(setups=None, n: int = 65):
    """One row per (corpus function, setup); verdict is a finite ratio (or a degenerate zero)."""
    rows = []
    setups = setups or DEFAULT_GN_SETUPS
    for st in setups:
        N, p, s, q, side = (st["N"], st["p"], st["s"], st["q"], st.get("side", "interior")) if isinstance(st, dict) else st
        setup = InterpolationSetup(int(N), float(p), float(s), float(q), side)
        try:
            alpha = setup.alpha
        except InadmissibleExponents as exc:
            raise ConfigError(f"inadmissible setup {st}: {exc}") from None
        if int(N) != 2:
            raise ConfigError("the GN corpus lives on the unit square (N = 2)")
        for name, u in spatial_corpus(n):
            r = check_gn(u, setup)
            ok = (r.degenerate and r.lhs == 0.0) or (not r.degenerate and math.isfinite(r.ratio))
            rows.append((name, side, N, p, s, q, alpha, r.lhs, r.w1p, r.ls, r.ratio, ok))
    return rows


EMB_HEADER = ["function", "side", "p", "q", "lhs", "rhs", "ratio", "empirical_constant", "corpus_version", "holds"]
PROBE_HEADER = ["side", "p", "critical_band", "supercritical_growth", "passed"]


def embedding_rows(p=(1.5, 2.0, 3.0), n: int = 65, nt: int = 16):
    rows, probes = [], []
    for pv in p:
        for side in ("interior", "boundary"):
            C = empirical_embedding_constant(float(pv), side, n, nt)
            for name, u in embedding_corpus(n, nt):
                r = check_parabolic_embedding(u, float(pv), side)
                rows.append((name, side, pv, r.q, r.lhs, r.rhs, r.ratio, C, CORPUS_VERSION, r.holds_with(C)))
            pr = supercritical_probe(float(pv), side)
            probes.append((side, pv, pr.critical_band, pr.supercritical_growth, pr.passed))
    return rows, probes


def smoothing_rows(seed: int = 0, n_pairs: int = 50, h: float = 0.1):
    """Duality, derivative identity, Steklov variable-exponent norm convergence and mollifier convergence."""
    rng = np.random.default_rng(seed)
    rows = []
    nt, T = 200, 1.0
    dt = T / nt
    W = np.full(nt + 1, dt)
    W[0] = W[-1] = dt / 2
    worst = 0.0
    for _ in range(n_pairs):
        v, w = rng.normal(size=(2, nt + 1))
        a = np.sum(W * v * time_average(w, dt, h, "backward"))
        b = np.sum(W * time_average(v, dt, h) * w)
        worst = max(worst, abs(a - b))
    rows.append(("duality", h, worst, worst <= 1e-8))
    errs = []
    for m in (100, 200, 400, 800):
        t = np.linspace(0, T, m + 1)
        sig = np.sin(2 * np.pi * t)
        tw = time_average(sig, T / m, h)
        d = np.gradient(tw, T / m, edge_order=2)
        errs.append(float(np.max(np.abs(d - (sig - tw) / h))))
        rows.append(("derivative-identity", m, errs[-1], True))
    ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    rows.append(("derivative-identity-ratio", "min", min(ratios), min(ratios) >= 1.8))
    grid = SpaceTimeGrid.uniform(BoxDomain.unit(1), 161, 1.0, 400)
    v = SampledField(grid, grid.sample(lambda t, x: np.sin(2 * np.pi * t) * np.sin(np.pi * x[..., 0])))
    serr = []
    for hh in (0.1, 0.05, 0.025):
        vh = steklov_field(v, hh)
        diff = SampledField(vh.grid, vh.values - v.values[: vh.grid.nt + 1])
        p = vh.grid.sample(lambda t, x: 2 + 0.5 * x[..., 0])
        serr.append(luxemburg_norm(diff, p, window=0.9))
        rows.append(("steklov-norm-error", hh, serr[-1], True))
    rows.append(("steklov-decreasing", "", float(serr[0] / serr[-1]), bool(serr[0] > serr[1] > serr[2])))
    from .grid import SpatialGrid, lp_norm

    sp = SpatialGrid(BoxDomain.unit(1), (801,))
    s0 = SampledField(sp, np.sin(2 * np.pi * sp.coords[..., 0]))
    merr = []
    for hh in (0.2, 0.1, 0.05, 0.025):
        e = mollify_space(s0, hh).values - s0.values
        merr.append(lp_norm(SampledField(sp, e), 2.0))
        rows.append(("mollifier-error", hh, merr[-1], True))
    rows.append(("mollifier-decreasing", "", float(merr[0] / merr[-1]), bool(all(a > b for a, b in zip(merr, merr[1:])))))
    return rows


# --------------------------------------------------------------------- entry points


def run(cfg: RunConfig, out: Path) -> int:
    out = Path(out)
    (out / "checks").mkdir(parents=True, exist_ok=True)
    r = _Run(cfg, out)
    status, error = EXIT_OK, None
    try:
        for task in cfg.tasks:
            getattr(r, "task_" + task.replace("-", "_"))()
    except SolverDivergence as exc:
        status, error = EXIT_DIVERGED, f"solver divergence: {exc}"
    except (ConfigError, PreconditionError, PartitionError, InadmissibleExponents) as exc:
        status, error = EXIT_CONFIG, f"precondition error: {exc}"
    if status == EXIT_OK and not all(r.assertions.values()):
        status = EXIT_FAIL
    summary = {
        "version": __version__,
        "problem": cfg.problem.name,
        "seed": cfg.seed,
        "tasks": cfg.tasks,
        "assertions": r.assertions,
        "passed": status == EXIT_OK,
        "status": status,
        "error": error,
        "info": r.info,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    if error:
        print(error, file=sys.stderr)
    for k, v in r.assertions.items():
        print(f"{'PASS' if v else 'FAIL'} {k}")
    return status


def _load_config(path: str, seed):
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    try:
        d = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return RunConfig.from_dict(d, p.parent, seed)


def _emit(rows, header, out):
    if out:
        write_rows(Path(out), header, rows)
    else:
        wr = csv.writer(sys.stdout, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([_fmt(v) for v in r])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="pxlab", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)
    pr = sub.add_parser("run", help="execute a JSON run configuration")
    pr.add_argument("--config", required=True)
    pr.add_argument("--out", default="pxlab-out")
    pr.add_argument("--seed", type=int, default=None)
    pg = sub.add_parser("check-gn", help="interpolation inequality table over the corpus")
    pg.add_argument("--out", default=None, help="CSV path (stdout when omitted)")
    pg.add_argument("--n", type=int, default=65)
    pe = sub.add_parser("check-embeddings", help="parabolic embedding table over the corpus")
    pe.add_argument("--out", default=None, help="CSV path (stdout when omitted)")
    pe.add_argument("--p", type=float, nargs="+", default=[1.5, 2.0, 3.0])
    args = ap.parse_args(argv)
    try:
        if args.cmd == "run":
            cfg = _load_config(args.config, args.seed)
            return run(cfg, Path(args.out))
        if args.cmd == "check-gn":
            rows = gn_rows(n=args.n)
            _emit(rows, GN_HEADER, args.out)
            return EXIT_OK if all(r[-1] for r in rows) else EXIT_FAIL
        rows, probes = embedding_rows(p=tuple(args.p))
        _emit(rows, EMB_HEADER, args.out)
        for pr_ in probes:
            print(f"{'PASS' if pr_[-1] else 'FAIL'} probe side={pr_[0]} p={pr_[1]:g} band={pr_[2]:.4g} growth={pr_[3]:.4g}", file=sys.stderr)
        return EXIT_OK if all(r[-1] for r in rows) and all(p[-1] for p in probes) else EXIT_FAIL
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
