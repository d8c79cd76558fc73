"""
mbqc_crosscheck.analysis
========================

Figures and tables of a cross-check report:
- scatter of rescaled outcome probabilities, device A versus device B,
  with the total-least-squares line and its 3-sigma band
- bar chart of per-device mean ℓ² distances (collision and theory)
- sub-sampling curves of the pair means
- drawings of the flows on the graph

This module uses pandas, matplotlib, networkx.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import networkx as nx  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .errors import DegenerateInput, MissingDistributions  # noqa: E402
from .harness import ExperimentPlan, plan_pairs  # noqa: E402
from .models import FlowSpec, OpenGraph, RelationSpec  # noqa: E402
from .verifier import total_least_squares  # noqa: E402

logger = logging.getLogger(__name__)


@dataclass
class PlotPaths:
    """Files written by :func:`emit_plots`."""
    csv: List[Path] = field(default_factory=list)
    png: List[Path] = field(default_factory=list)

    @property
    def all(self) -> List[Path]:
        return self.csv + self.png


def _ensure_outdir(out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def scatter_rows(
    probs_a: Sequence[float],
    probs_b: Sequence[float],
    relation: RelationSpec,
) -> List[Dict[str, Any]]:
    """
    One row per related outcome pair: ``x = Pr_A(a)``, ``y = scale * Pr_B(b)``.

    On ideal devices every row lies on the diagonal.
    """
    pa = np.asarray(getattr(probs_a, "probs", probs_a), dtype=float)
    pb = np.asarray(getattr(probs_b, "probs", probs_b), dtype=float)
    scale = float(relation.scale)
    return [
        {"a": a, "b": b, "x": float(pa[int(a, 2)]), "y": scale * float(pb[int(b, 2)])}
        for a, b in relation.pairs()
    ]


def _pair_frame(report: Mapping[str, Any], pair: Mapping[str, Any], relation: RelationSpec) -> pd.DataFrame:
    dev_a, dev_b = pair["pair"]
    dists = report["distributions"]
    rows = []
    for instance in report.get("comparison_instances", []):
        key = str(instance)
        if key not in dists.get(dev_a, {}) or key not in dists.get(dev_b, {}):
            continue
        da, db = dists[dev_a][key], dists[dev_b][key]
        empirical = scatter_rows(da["empirical"], db["empirical"], relation)
        ideal = scatter_rows(da["ideal"], db["ideal"], relation) if da.get("ideal") and db.get("ideal") else None
        scale = float(relation.scale)
        for j, r in enumerate(empirical):
            yb = r["y"] / scale
            rows.append({
                "instance_id": instance,
                "a": r["a"],
                "b": r["b"],
                "x": r["x"],
                "y": r["y"],
                "x_err": math.sqrt(max(r["x"] * (1 - r["x"]), 0.0) / da["shots"]),
                "y_err": scale * math.sqrt(max(yb * (1 - yb), 0.0) / db["shots"]),
                "x_ideal": ideal[j]["x"] if ideal else None,
                "y_ideal": ideal[j]["y"] if ideal else None,
            })
    return pd.DataFrame(rows, columns=["instance_id", "a", "b", "x", "y", "x_err", "y_err", "x_ideal", "y_ideal"])


def _scatter_plot(df: pd.DataFrame, band: pd.DataFrame | None, title: str, path: Path) -> None:
    fig = plt.figure(figsize=(6, 6))
    plt.errorbar(df["x"], df["y"], xerr=df["x_err"], yerr=df["y_err"], fmt="o", ms=3, alpha=0.6, label="outcomes")
    top = float(max(df["x"].max(), df["y"].max(), 1e-3))
    plt.plot([0, top], [0, top], "k:", lw=1, label="y = x")
    if band is not None:
        plt.plot(band["x"], band["fit"], "r-", lw=1.5, label="TLS")
        plt.fill_between(band["x"], band["lower"], band["upper"], color="r", alpha=0.2, label="3σ")
    plt.title(title)
    plt.xlabel("Pr(A)")
    plt.ylabel("scale · Pr(B)")
    plt.legend()
    plt.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def draw_flow(graph: OpenGraph, flow: FlowSpec, path: str | Path) -> Path:
    """Graph with the flow's successor edges drawn as arrows."""
    p = Path(path)
    g = graph.to_networkx()
    pos = nx.spring_layout(g, seed=42)
    outputs = set(flow.outputs(graph))
    colors = ["tab:orange" if v in outputs else "tab:blue" for v in g.nodes()]
    fig = plt.figure(figsize=(6, 4))
    plt.title(f"{graph.name}: {flow.name}")
    nx.draw(g, pos, with_labels=True, node_color=colors, edge_color="lightgray")
    arrows = nx.DiGraph()
    arrows.add_nodes_from(g.nodes())
    arrows.add_edges_from(flow.successor.items())
    nx.draw_networkx_edges(arrows, pos, edge_color="tab:red", width=2, arrows=True, arrowsize=15)
    plt.tight_layout()
    fig.savefig(p, dpi=150)
    plt.close(fig)
    return p


def emit_plots(report: Any, out_dir: str | Path = "reports") -> PlotPaths:
    """
    Write CSV tables and PNG figures for a report.

    Returns
    -------
    PlotPaths

    Raises
    ------
    MissingDistributions
        When the report carries no per-device distributions; nothing is written.
    """
    data = getattr(report, "data", report) or {}
    if not data.get("pairs") or not any(data.get("distributions", {}).values()):
        raise MissingDistributions("В отчёте нет распределений для построения графиков.")

    plan = ExperimentPlan.from_dict(data["plan"])
    graph, flows = plan.resolve()
    relations = {p.key: p.relation for p in plan_pairs(plan, graph, flows)}
    out = _ensure_outdir(out_dir)
    paths = PlotPaths()

    regression_rows = []
    for pair in data["pairs"]:
        key = "|".join(pair["pair"])
        stem = _safe(f"{pair['pair'][0]}__{pair['pair'][1]}")
        df = _pair_frame(data, pair, relations[key])
        p = out / f"scatter_{stem}.csv"
        df.to_csv(p, index=False)
        paths.csv.append(p)

        band = None
        try:
            fit = total_least_squares(list(zip(df["x"], df["y"])), df["x_err"].tolist(), df["y_err"].tolist())
        except DegenerateInput as exc:
            logger.warning("no regression for %s: %s", key, exc)
            regression_rows.append({"pair": key, "slope": None, "err": None, "intercept": None, "intercept_err": None})
        else:
            regression_rows.append({"pair": key, **fit.to_dict()})
            xs = np.linspace(0.0, float(df["x"].max()), 50)
            half = fit.band(xs)
            band = pd.DataFrame({"x": xs, "fit": fit.predict(xs)})
            band["lower"], band["upper"] = band["fit"] - half, band["fit"] + half
            p = out / f"band_{stem}.csv"
            band.to_csv(p, index=False)
            paths.csv.append(p)

        if not df.empty:
            p = out / f"scatter_{stem}.png"
            _scatter_plot(df, band, f"{pair['pair'][0]} vs {pair['pair'][1]}", p)
            paths.png.append(p)

    p = out / "regression.csv"
    pd.DataFrame(regression_rows, columns=["pair", "slope", "err", "intercept", "intercept_err"]).to_csv(p, index=False)
    paths.csv.append(p)

    bars = pd.DataFrame(
        [{"device": d, **{k: m.get(k) for k in ("mean_l2", "err", "theory_l2", "theory_err")}}
         for d, m in sorted(data.get("device_means", {}).items())],
        columns=["device", "mean_l2", "err", "theory_l2", "theory_err"],
    )
    for col in ("mean_l2", "err", "theory_l2", "theory_err"):
        bars[col] = pd.to_numeric(bars[col], errors="coerce")
    p = out / "bars.csv"
    bars.to_csv(p, index=False)
    paths.csv.append(p)

    fig = plt.figure(figsize=(7, 4))
    x = np.arange(len(bars))
    width = 0.4
    plt.bar(x - width / 2, bars["mean_l2"].fillna(0.0), width, yerr=bars["err"].fillna(0.0), label="collision")
    if bars["theory_l2"].notna().any():
        plt.bar(x + width / 2, bars["theory_l2"].fillna(0.0), width, yerr=bars["theory_err"].fillna(0.0),
                label="vs theory")
    plt.xticks(x, bars["device"], rotation=30, ha="right")
    plt.ylabel("‖p − p'‖²")
    plt.title("Mean ℓ² distance per device")
    plt.legend()
    plt.tight_layout()
    p = out / "bars.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    paths.png.append(p)

    sub_rows = [{"pair": "|".join(pair["pair"]), **row} for pair in data["pairs"] for row in pair.get("subsample", [])]
    sub = pd.DataFrame(sub_rows, columns=["pair", "size", "mean", "spread", "subsets"])
    p = out / "subsample.csv"
    sub.to_csv(p, index=False)
    paths.csv.append(p)
    if not sub.empty:
        fig = plt.figure()
        for key, g in sub.groupby("pair"):
            plt.errorbar(g["size"], g["mean"], yerr=g["spread"], marker="o", capsize=3, label=key)
        plt.xlabel("Instances in subset")
        plt.ylabel("Mean ℓ²")
        plt.title("Sub-sampling of pair means")
        plt.legend()
        plt.tight_layout()
        p = out / "subsample.png"
        fig.savefig(p, dpi=150)
        plt.close(fig)
        paths.png.append(p)

    for flow in sorted({f.name: f for f in flows.values()}.values(), key=lambda f: f.name):
        paths.png.append(draw_flow(graph, flow, out / f"flow_{_safe(graph.name)}_{_safe(flow.name)}.png"))

    logger.info("wrote %d csv and %d png file(s) to %s", len(paths.csv), len(paths.png), out)
    return paths
