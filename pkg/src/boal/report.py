"""Result tables and figures for protocol runs.

Grids mirror the usual benchmark layout: one row per problem, a lone
baseline column, then per-budget column groups for each querying strategy.
Figures render the same aggregates as PNG files next to the delimited
output.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .engine import BASE, MAX_ORACLE
from .evaluation import ProtocolResult

STRATEGY_LABELS = {
    BASE: "Base",
    "uniform": "UNI",
    "sa": "SA",
    "psa": "PSA",
    "ets": "ETS",
    MAX_ORACLE: "Max",
}


def _label(strategy: str) -> str:
    return STRATEGY_LABELS.get(strategy, strategy.upper())


def format_rmse_grid(result: ProtocolResult) -> str:
    """Budget-grouped mean-RMSE grid with a single baseline column."""
    spec = result.spec
    querying = [s for s in spec.strategies if s != BASE]
    header1 = ["Budget"] + (["0"] if BASE in spec.strategies else [])
    header2 = ["Problem"] + (["Base"] if BASE in spec.strategies else [])
    for b in spec.budgets:
        header1 += [str(b)] + [""] * (len(querying) - 1)
        header2 += [_label(s) for s in querying]
    row = [result.problem_name]
    if BASE in spec.strategies:
        row.append(f"{result.mean_rmse(BASE, 0):.3f}")
    for b in spec.budgets:
        for s in querying:
            row.append(f"{result.mean_rmse(s, b):.3f}")
    return _render_grid([header1, header2, row])


def format_score_grid(result: ProtocolResult) -> str:
    """Budget-grouped mean selected-score grid including the max oracle."""
    spec = result.spec
    strategies = [s for s in spec.strategies if s != BASE]
    if spec.include_max_oracle and MAX_ORACLE not in strategies:
        strategies = strategies + [MAX_ORACLE]
    header1 = ["Budget"]
    header2 = ["Problem"]
    for b in spec.budgets:
        header1 += [str(b)] + [""] * (len(strategies) - 1)
        header2 += [_label(s) for s in strategies]
    row = [result.problem_name]
    for b in spec.budgets:
        for s in strategies:
            value = result.mean_selected_score(s, b)
            row.append("-" if value is None else f"{value:.3f}")
    return _render_grid([header1, header2, row])


def _render_grid(rows) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for idx, row in enumerate(rows):
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
        if idx == 1:
            lines.append("-" * len(lines[-1]))
    return "\n".join(lines)


def write_results_csv(result: ProtocolResult, path) -> None:
    """Per-run rows: strategy,budget,episode_id,rmse,mean_selected_score."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["strategy", "budget", "episode_id", "rmse", "mean_selected_score"]
        )
        for row in result.rows:
            writer.writerow(
                [
                    row.strategy,
                    str(row.budget),
                    row.episode_id,
                    repr(row.rmse),
                    "" if row.mean_selected_score is None else repr(row.mean_selected_score),
                ]
            )


def summary_dict(result: ProtocolResult) -> dict:
    spec = result.spec
    strategies = list(spec.strategies)
    if spec.include_max_oracle and MAX_ORACLE not in strategies:
        strategies.append(MAX_ORACLE)
    cells = {}
    for s in strategies:
        per_budget = {}
        for b in spec.budgets:
            if s == BASE:
                per_budget[str(b)] = {"mean_rmse": result.mean_rmse(BASE, 0)}
                continue
            per_budget[str(b)] = {
                "mean_rmse": result.mean_rmse(s, b),
                "mean_selected_score": result.mean_selected_score(s, b),
            }
        cells[s] = per_budget
    return {
        "problem": result.problem_name,
        "budgets": list(spec.budgets),
        "strategies": strategies,
        "runs": len(result.episode_ids),
        "episode_ids": result.episode_ids,
        "cells": cells,
        "wilcoxon": result.wilcoxon_table(),
    }


def write_summary_json(result: ProtocolResult, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary_dict(result), indent=2) + "\n")


def render_rmse_figure(result: ProtocolResult, path) -> None:
    """Mean RMSE vs budget, one line per strategy, baseline dashed."""
    spec = result.spec
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    budgets = list(spec.budgets)
    for s in spec.strategies:
        if s == BASE:
            base_val = result.mean_rmse(BASE, 0)
            ax.axhline(base_val, linestyle="--", color="gray", label="Base")
            continue
        ax.plot(budgets, [result.mean_rmse(s, b) for b in budgets], marker="o",
                label=_label(s))
    ax.set_xlabel("query budget")
    ax.set_ylabel("mean RMSE")
    ax.set_title(f"{result.problem_name}: prediction error vs budget")
    ax.set_xticks(budgets)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_score_figure(result: ProtocolResult, path) -> None:
    """Mean selected score vs budget, including the hindsight oracle."""
    spec = result.spec
    strategies = [s for s in spec.strategies if s != BASE]
    if spec.include_max_oracle and MAX_ORACLE not in strategies:
        strategies.append(MAX_ORACLE)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    budgets = list(spec.budgets)
    for s in strategies:
        values = [result.mean_selected_score(s, b) for b in budgets]
        style = {"linestyle": ":", "color": "black"} if s == MAX_ORACLE else {}
        ax.plot(budgets, values, marker="o", label=_label(s), **style)
    ax.set_xlabel("query budget")
    ax.set_ylabel("mean selected score")
    ax.set_title(f"{result.problem_name}: selected committee variance vs budget")
    ax.set_xticks(budgets)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
