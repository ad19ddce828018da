"""PNG figures rendered from report traces (Agg backend, no display needed)."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

FIG_SIZE = (6.4, 4.0)
DPI = 110

STYLE = {
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "savefig.bbox": "tight",
}


def _group(traces):
    # (series, case_id) -> index -> [(x, y, marker)]
    out: dict = defaultdict(lambda: defaultdict(list))
    for t in traces:
        out[(t.series, t.case_id)][t.index].append((t.x, t.y, t.marker))
    return out


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=DPI, metadata={"Software": None})
    plt.close(fig)
    return path


def flow_figure(groups, case_id: str, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    for pts in groups[("eig", case_id)].values():
        xs, ys, _ = zip(*pts)
        ax.plot(xs, ys, lw=0.8, color="0.35")
    ax.axhline(0.0, color="k", lw=0.6)
    for pts in groups.get(("crossing", case_id), {}).values():
        for x, _, marker in pts:
            color = "tab:blue" if marker.startswith("+") else "tab:red"
            ax.plot([x], [0.0], "o", ms=5, color=color)
    ax.set_xlabel("s")
    ax.set_ylabel("eigenvalues of A_s")
    ax.set_title(f"case {case_id}: eigenvalue traces, crossings marked")
    return _save(fig, path)


def dual_figure(groups, path: Path) -> Path:
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(FIG_SIZE[0] * 1.4, FIG_SIZE[1]))
    if ("psi", "dual") in groups:
        xs, ys, _ = zip(*sorted(_flatten(groups[("psi", "dual")]), key=lambda p: p[0]))
        a1.plot(xs, ys, ".-", ms=3)
    if ("grad-norm", "dual") in groups:
        xs, ys, _ = zip(*sorted(_flatten(groups[("grad-norm", "dual")]), key=lambda p: p[0]))
        a2.semilogy(xs, [max(y, 1e-300) for y in ys], ".-", ms=3, color="tab:orange")
    a1.set_xlabel("evaluation")
    a1.set_ylabel("Psi(u)")
    a2.set_xlabel("evaluation")
    a2.set_ylabel("||grad Psi||")
    fig.suptitle("dual descent")
    return _save(fig, path)


def _flatten(by_index):
    return [p for pts in by_index.values() for p in pts]


def witness_figure(groups, path: Path) -> Path:
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(FIG_SIZE[0] * 1.4, FIG_SIZE[1]))
    tent = sorted(_flatten(groups.get(("tent", "witness"), {})), key=lambda p: p[0])
    if tent:
        xs, ys, _ = zip(*tent)
        a1.plot(xs, ys)
    a1.set_xlabel("t")
    a1.set_ylabel("f(t)")
    a1.set_title("test profile")
    eigs = [p[1] for p in _flatten(groups.get(("gap-eig", "witness"), {}))]
    a2.plot(range(len(eigs)), eigs, "o")
    a2.axhline(0.0, color="k", lw=0.6)
    a2.set_xlabel("index")
    a2.set_ylabel("eigenvalue")
    a2.set_title("eigenvalues in the witness window")
    return _save(fig, path)


def dirac_figure(groups, path: Path) -> Path:
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(FIG_SIZE[0] * 1.4, FIG_SIZE[1]))
    err = sorted(_flatten(groups.get(("radial-error", "radial"), {})), key=lambda p: p[0])
    if err:
        xs, ys, _ = zip(*err)
        a1.loglog(xs, ys, "o-")
        a1.loglog(xs, [ys[0] * (xs[0] / x) ** 2 for x in xs], "--", color="0.5", label="slope -2")
        a1.legend()
    a1.set_xlabel("n")
    a1.set_ylabel("|lambda_1(n) - (pi/R)^2|")
    eigs = [p[1] for p in _flatten(groups.get(("dirac-eig", "dirac"), {}))]
    a2.plot(range(len(eigs)), eigs, "o")
    a2.set_xlabel("index")
    a2.set_ylabel("eigenvalue")
    a2.set_title("1-D Dirac eigenvalues in the gap")
    return _save(fig, path)


def render_figures(report, out_dir) -> list[Path]:
    """Render every figure the report's traces support into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    groups = _group(report.traces)
    series = {s for s, _ in groups}
    paths = []
    with plt.rc_context(STYLE):
        if "eig" in series:
            for case_id in sorted({c for s, c in groups if s == "eig"}):
                paths.append(flow_figure(groups, case_id, out / f"flow_{case_id}.png"))
        if "psi" in series:
            paths.append(dual_figure(groups, out / "dual_descent.png"))
        if "tent" in series or "gap-eig" in series:
            paths.append(witness_figure(groups, out / "hamiltonian_witness.png"))
        if "radial-error" in series:
            paths.append(dirac_figure(groups, out / "dirac_witness.png"))
        if report.rows and not paths:
            paths.append(identity_figure(report, out / "identities.png"))
    return paths


def identity_figure(report, path: Path) -> Path:
    """lhs against rhs for every identity row, one marker style per identity."""
    by_name = defaultdict(list)
    for r in report.rows:
        if r.lhs is None or r.rhs is None:
            continue
        by_name[r.case_id.split("/", 1)[-1].split("-k")[0]].append((r.rhs, r.lhs))
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    for name, pts in sorted(by_name.items()):
        xs, ys = zip(*pts)
        ax.plot(xs, ys, "o", ms=4, alpha=0.6, label=name)
    vals = [v for pts in by_name.values() for p in pts for v in p] or [0.0]
    lim = [min(vals) - 1, max(vals) + 1]
    ax.plot(lim, lim, "k--", lw=0.6)
    ax.set_xlabel("rhs")
    ax.set_ylabel("lhs")
    ax.legend()
    ax.set_title("identity checks (on the diagonal = pass)")
    return _save(fig, path)
