"""Experiment orchestration and report files.

Report CSV columns (fixed order)::

    case_id,kind,params,i,nu,lhs,rhs,dev,pass,ms

``params`` is a ``;``-separated ``key=value`` list.  Floats are written with
``repr`` so identical runs give identical bytes; ``ms`` stays empty unless
``record_timing`` is set.  Rows are sorted by ``case_id``.

Plot-data CSV columns::

    series,case_id,index,x,y,marker

one point per row, grouped by case_id and series in emission order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dual, flow, models, sampling
from . import symmetric as sym
from .config import ExperimentConfig, dump_config
from .index import (
    GappedOperator,
    check_admissible,
    crossing_sum,
    duality_identity_check,
    index_pair,
    index_via_crossings,
    morse_index,
    shift_candidates,
)

REPORT_COLUMNS = ("case_id", "kind", "params", "i", "nu", "lhs", "rhs", "dev", "pass", "ms")
PLOT_COLUMNS = ("series", "case_id", "index", "x", "y", "marker")
#: number of spectral-flow cases whose eigenvalue traces are kept
TRACED_CASES = 3
TRACE_POINTS = 201


@dataclass
class Row:
    case_id: str
    kind: str
    params: dict
    lhs: float | int | None = None
    rhs: float | int | None = None
    dev: float | None = None
    passed: bool = False
    i: int | None = None
    nu: int | None = None
    ms: float | None = None


@dataclass(frozen=True)
class TracePoint:
    series: str
    case_id: str
    index: int
    x: float
    y: float
    marker: str = ""


@dataclass
class Report:
    config: ExperimentConfig
    rows: list[Row] = field(default_factory=list)
    traces: list[TracePoint] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)

    @property
    def n_pass(self) -> int:
        return sum(r.passed for r in self.rows)

    @property
    def n_fail(self) -> int:
        return len(self.rows) - self.n_pass

    @property
    def passed(self) -> bool:
        return self.n_fail == 0

    def summary(self) -> dict:
        devs = {}
        for r in self.rows:
            if r.dev is None or not math.isfinite(r.dev):
                continue
            name = r.case_id.split("/", 1)[-1]
            devs[name] = max(devs.get(name, 0.0), abs(float(r.dev)))
        return {
            "kind": self.config.kind,
            "seed": self.config.seed,
            "rows": len(self.rows),
            "n_pass": self.n_pass,
            "n_fail": self.n_fail,
            "pass": self.passed,
            "max_abs_dev": devs,
            "errors": self.errors,
            "failed_cases": [r.case_id for r in self.rows if not r.passed],
        }


# ---------------------------------------------------------------------------
# row helpers


def _int_row(case_id, kind, params, lhs, rhs, i=None, nu=None) -> Row:
    lhs, rhs = int(lhs), int(rhs)
    return Row(case_id, kind, params, lhs, rhs, float(lhs - rhs), lhs == rhs, i, nu)


def _rel_row(case_id, kind, params, lhs, rhs, rtol) -> Row:
    dev = (lhs - rhs) / abs(rhs)
    return Row(case_id, kind, dict(params, rtol=rtol), float(lhs), float(rhs), float(dev), abs(dev) <= rtol)


def _less_row(case_id, kind, params, lhs, rhs) -> Row:
    return Row(case_id, kind, params, float(lhs), float(rhs), float(lhs - rhs), lhs < rhs)


def _case_rng(cfg: ExperimentConfig, case: int, stream: int = 0) -> np.random.Generator:
    # depends only on (seed, case, stream), never on scheduling
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, case, stream]))


def _gap_params(G: GappedOperator) -> dict:
    return {"dim": G.dim, "lambda_a": round(G.lambda_a, 6), "lambda_b": round(G.lambda_b, 6)}


# ---------------------------------------------------------------------------
# experiment kinds


def _index_identities_case(cfg: ExperimentConfig, c: int):
    kind = cfg.kind
    base = f"{c:05d}"
    rows = []
    rng = _case_rng(cfg, c, 0)
    case = sampling.random_case(rng, cfg.dim_min, cfg.dim_max)
    G, P = case.G, check_admissible(case.G, case.B)
    params = _gap_params(G)
    ip = index_pair(G, P)
    rows.append(_int_row(f"{base}/definition", kind, params, ip.i, index_via_crossings(G, P), ip.i, ip.nu))
    lhs, rhs = duality_identity_check(G, P)
    rows.append(_int_row(f"{base}/duality", kind, params, lhs, rhs, ip.i, ip.nu))
    sf = flow.verify_sf_index(G, P, cfg.tol)
    rows.append(_int_row(f"{base}/spectral-flow", kind, dict(params, method=sf.method), sf.sf, sf.minus_i, ip.i, ip.nu))

    G2, B1, B2 = sampling.random_ordered_pair(_case_rng(cfg, c, 1), cfg.dim_min, cfg.dim_max)
    P1, P2 = check_admissible(G2, B1), check_admissible(G2, B2)
    cs = crossing_sum(G2, P1, P2)
    for j, k in enumerate(shift_candidates(G2, P1, P2, count=cfg.shifts)):
        diff = morse_index(G2, P2, k) - morse_index(G2, P1, k)
        rows.append(_int_row(f"{base}/crossing-k{j}", kind, dict(_gap_params(G2), k=k), diff, cs))

    Gd = sampling.random_case(_case_rng(cfg, c, 2), cfg.dim_min, cfg.dim_max, degenerate=True)
    pd = index_pair(Gd.G, Gd.B)
    rows.append(_int_row(f"{base}/degenerate", kind, _gap_params(Gd.G), abs(pd.i) + pd.nu, 0, pd.i, pd.nu))
    return rows, []


def _spectral_flow_case(cfg: ExperimentConfig, c: int):
    kind = cfg.kind
    base = f"{c:05d}"
    rng = _case_rng(cfg, c, 0)
    case = sampling.random_case(rng, cfg.dim_min, cfg.dim_max)
    G, P = case.G, check_admissible(case.G, case.B)
    params = _gap_params(G)
    ip = index_pair(G, P)
    path = flow.OperatorPath.canonical(G, P)
    res = flow.spectral_flow(path, cfg.tol)
    rows = [_int_row(f"{base}/sf-index", kind, dict(params, method=res.method), res.sf, -ip.i, ip.i, ip.nu)]

    # additivity on a random split Bbar -> Bm -> B
    while True:
        Bm = sampling.random_perturbation(rng, G)
        if sampling._well_separated(G, P.B, Bm):
            break
    leg1 = flow.spectral_flow(flow.OperatorPath.affine(G.A - G.bbar(), G.A - Bm), cfg.tol)
    leg2 = flow.spectral_flow(flow.OperatorPath.affine(G.A - Bm, G.A - P.B), cfg.tol)
    joined = flow.spectral_flow(
        flow.OperatorPath.affine(G.A - G.bbar(), G.A - Bm).then(flow.OperatorPath.affine(G.A - Bm, G.A - P.B)),
        cfg.tol,
    )
    rows.append(_int_row(f"{base}/additivity", kind, params, leg1.sf + leg2.sf, res.sf, ip.i, ip.nu))
    rows.append(_int_row(f"{base}/concatenation", kind, params, joined.sf, leg1.sf + leg2.sf, ip.i, ip.nu))

    traces = []
    if c < TRACED_CASES:
        traces = flow_traces(path, res, base)
    return rows, traces


def flow_traces(path: flow.OperatorPath, res: flow.FlowResult, case_id: str) -> list[TracePoint]:
    """Eigenvalue-vs-s curves plus one marker point per crossing."""
    s_grid = np.linspace(0.0, 1.0, TRACE_POINTS)
    W = np.array([sym.eigvalsh(path.at(s)) for s in s_grid])
    out = [TracePoint("eig", case_id, j, float(s), float(v)) for j in range(W.shape[1]) for s, v in zip(s_grid, W[:, j])]
    for j, cr in enumerate(res.crossings):
        out.append(TracePoint("crossing", case_id, j, cr.s, 0.0, f"{cr.sign:+d}x{cr.kernel_dim}"))
    return out


def _hamiltonian_witness(cfg: ExperimentConfig):
    kind = cfg.kind
    g = models.Grid1D(cfg.T, cfg.n, 2 * cfg.N)
    L = models.example_L(cfg.r1, cfg.r2, cfg.b_max, cfg.N)
    params = {"r": cfg.r, "r1": cfg.r1, "r2": cfg.r2, "b_max": cfg.b_max, "T": cfg.T, "n": cfg.n, "N": cfg.N}
    num, den = models.rayleigh_witness(cfg.r, cfg.r1, g, cfg.N, L)
    exact_num, exact_den = models.tent_closed_forms(cfg.r, cfg.r1)
    stated_num, stated_den = 2.0, 2.0 * cfg.r + (cfg.r1 - cfg.r) / 3.0
    rows = [
        _rel_row("witness/num-stated", kind, params, num, stated_num, cfg.num_rtol),
        _rel_row("witness/num-closed-form", kind, params, num, exact_num, cfg.num_rtol),
        _rel_row("witness/den-stated", kind, params, den, stated_den, cfg.den_rtol),
        _rel_row("witness/den-closed-form", kind, params, den, exact_den, cfg.den_rtol),
        _less_row("witness/quotient", kind, params, num / den, 1.0 / cfg.r),
    ]
    A = models.hamiltonian_operator(L, g, cfg.N)
    edge = 1.0 / math.sqrt(cfg.r)
    # closed window [-edge, edge]
    inside = sym.eigvals_in(A, np.nextafter(-edge, -np.inf), edge)
    cnt = len(inside)
    rows.append(Row("witness/gap-eigs", kind, dict(params, window=edge), cnt, 1, float(cnt - 1), cnt >= 1, i=cnt))
    traces = [TracePoint("gap-eig", "witness", j, float(j), float(v)) for j, v in enumerate(np.sort(inside))]
    t = g.nodes[:: max(1, g.n // 400)]
    f = models.tent_profile(t, cfg.r, cfg.r1)
    traces += [TracePoint("tent", "witness", j, float(x), float(y)) for j, (x, y) in enumerate(zip(t, f))]
    return rows, traces


def _dirac_witness(cfg: ExperimentConfig):
    kind = cfg.kind
    exact = (math.pi / cfg.R) ** 2
    rows, traces = [], []
    lam = models.radial_first_eigenvalue(cfg.R, cfg.n)
    rows.append(_rel_row("radial/eigenvalue", kind, {"R": cfg.R, "n": cfg.n}, lam, exact, cfg.eig_rtol))
    errs = []
    # coarser grids keep the O(h^2) error well above eigensolver roundoff (~ eps / h^2)
    n0 = max(100, cfg.n // 8)
    for j, n in enumerate(n0 * 2**m for m in range(3)):
        e = abs(models.radial_first_eigenvalue(cfg.R, n) - exact)
        errs.append(e)
        traces.append(TracePoint("radial-error", "radial", j, float(n), float(e)))
    orders = [math.log2(errs[m] / errs[m + 1]) for m in range(2)]
    ok = all(errs[m + 1] < errs[m] for m in range(2)) and all(abs(p - 2.0) <= 0.1 for p in orders)
    rows.append(Row("radial/order", kind, {"R": cfg.R, "n0": n0}, orders[-1], 2.0, orders[-1] - 2.0, ok))

    g = models.Grid1D(cfg.T, cfg.n_dirac, 4)
    V = models.potential_well_V(cfg.R, cfg.b_max)
    M = models.dirac1d_operator(V, g)
    inside = sym.eigvals_in(M, -cfg.b_max, np.nextafter(cfg.b_max, -np.inf))
    # realified spectrum doubles every complex eigenvalue; report complex counts
    cnt = len(inside) // 2
    params = {"R": cfg.R, "b_max": cfg.b_max, "T": cfg.T, "n": cfg.n_dirac, "convention": "complex",
              "lambda1_below_bmax_sq": lam < cfg.b_max**2}
    rows.append(Row("dirac/gap-eigs", kind, params, cnt, 1, float(cnt - 1), cnt >= 1, i=cnt))
    traces += [TracePoint("dirac-eig", "dirac", j, float(j), float(v)) for j, v in enumerate(np.sort(inside)[::2])]
    return rows, traces


def scalar_dual_model(cfg: ExperimentConfig):
    """``A = a I_d`` on ``d = dual_nodes`` nodes with the saturating nonlinearity."""
    d = cfg.dual_nodes
    gap = max(1.0, abs(cfg.a_value) + 0.5, abs(cfg.slope_inf) + cfg.bump + 0.2, abs(cfg.lower) + 0.2)
    G = GappedOperator(cfg.a_value * np.eye(d), -gap, gap)
    nl = dual.saturating_nonlinearity(1, cfg.slope_inf, cfg.bump, cfg.width, cfg.lower, cfg.upper)
    nodes = np.arange(d, dtype=float)
    return G, nl, nodes, 1.0


def _dual_solve(cfg: ExperimentConfig):
    kind = cfg.kind
    G, nl, nodes, weight = scalar_dual_model(cfg)
    params = {"a": cfg.a_value, "d": cfg.dual_nodes, "slope_inf": cfg.slope_inf, "bump": cfg.bump}
    rep = dual.twisting_report(nl, G, nodes)
    rows = [Row("dual/twisting", kind, dict(params, branch=rep.branch), rep.i0, rep.i2, float(rep.i0 - rep.i2),
                rep.branch is not None and rep.structure, i=rep.predicted_pairs, nu=rep.nu0)]
    if rep.branch is None:
        return rows, []
    problem, eps = dual.build_problem(G, nl, nodes, weight, rep.branch)
    st = dual.minimize_dual(problem, budget=cfg.budget, grad_tol=cfg.grad_tol)
    p = dict(params, eps=eps, evals=st.n_evals)
    bound = cfg.grad_tol * (1.0 + abs(st.psi_value))
    psi0 = dual.dual_functional(problem, np.zeros_like(st.u))[0]
    rows += [
        Row("dual/gradient", kind, p, st.grad_norm, bound, st.grad_norm - bound, st.converged),
        Row("dual/residual", kind, p, st.residual, cfg.residual_tol, st.residual - cfg.residual_tol,
            st.residual <= cfg.residual_tol),
        _less_row("dual/descent", kind, p, st.psi_value, psi0),
    ]
    traces = [TracePoint("psi", "dual", j, float(j), float(v)) for j, (v, _) in enumerate(st.history)]
    traces += [TracePoint("grad-norm", "dual", j, float(j), float(gn)) for j, (_, gn) in enumerate(st.history)]
    return rows, traces


SWEEPS = {"index-identities": _index_identities_case, "spectral-flow": _spectral_flow_case}
SINGLE = {"hamiltonian-witness": _hamiltonian_witness, "dirac-witness": _dirac_witness, "dual-solve": _dual_solve}


def _error_row(cfg, case_id: str, exc: Exception) -> tuple[Row, dict]:
    msg = f"{type(exc).__name__}: {exc}"
    return Row(f"{case_id}/error", cfg.kind, {"error": msg}), {"case_id": case_id, "message": msg}


def run_experiment(cfg: ExperimentConfig, threads: int = 1, log=None) -> Report:
    """Run every case of the configured experiment; failures become rows."""
    report = Report(cfg)

    def run_one(label: str, fn, *args):
        t0 = time.perf_counter()
        try:
            rows, traces = fn(cfg, *args)
            err = None
        except Exception as exc:  # one failing case must not abort the sweep
            row, err = _error_row(cfg, label, exc)
            rows, traces = [row], []
        if cfg.record_timing:
            ms = (time.perf_counter() - t0) * 1e3
            for r in rows:
                r.ms = ms
        if log is not None:
            log(f"{label}: {sum(r.passed for r in rows)}/{len(rows)} rows pass")
        return rows, traces, err

    if cfg.kind in SWEEPS:
        fn = SWEEPS[cfg.kind]
        jobs = [(f"{c:05d}", fn, c) for c in range(cfg.count)]
    else:
        jobs = [(cfg.kind, SINGLE[cfg.kind])]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda j: run_one(*j), jobs))
    else:
        results = [run_one(*j) for j in jobs]

    for rows, traces, err in results:
        report.rows.extend(rows)
        report.traces.extend(traces)
        if err is not None:
            report.errors.append(err)
    report.rows.sort(key=lambda r: r.case_id)
    report.traces.sort(key=lambda p: p.case_id)  # stable: series order kept within a case
    report.errors.sort(key=lambda e: e["case_id"])
    return report


# ---------------------------------------------------------------------------
# writers


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _fmt_params(params: dict) -> str:
    return ";".join(f"{k}={_fmt(v)}" for k, v in params.items())


def report_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in report.rows:
        w.writerow([r.case_id, r.kind, _fmt_params(r.params), _fmt(r.i), _fmt(r.nu), _fmt(r.lhs), _fmt(r.rhs),
                    _fmt(r.dev), _fmt(r.passed), _fmt(r.ms)])
    return buf.getvalue()


def summary_json(report: Report) -> str:
    return json.dumps(report.summary(), sort_keys=True, indent=2) + "\n"


def write_report(report: Report, out_dir) -> dict:
    """Write ``report.csv``, ``summary.json`` and ``config.txt``; return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"report": out / "report.csv", "summary": out / "summary.json", "config": out / "config.txt"}
    paths["report"].write_text(report_csv(report), encoding="utf-8")
    paths["summary"].write_text(summary_json(report), encoding="utf-8")
    paths["config"].write_text(dump_config(report.config), encoding="utf-8")
    return paths


def emit_plot_data(report: Report, path) -> Path:
    """Write traces as long-format CSV with columns ``PLOT_COLUMNS``."""
    p = Path(path)
    if p.parent and not p.parent.exists():
        raise FileNotFoundError(f"directory {str(p.parent)!r} does not exist")
    with open(p, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_COLUMNS)
        for t in report.traces:
            w.writerow([t.series, t.case_id, t.index, _fmt(t.x), _fmt(t.y), t.marker])
    return p
