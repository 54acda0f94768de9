"""Plain-text (markdown) rendering of rank summaries."""

from __future__ import annotations

import math
import re

from .stats import RankSummary


def _p(p: float) -> str:
    return "nan" if math.isnan(p) else f"{p:.2g}"


def render_ranks(s: RankSummary) -> str:
    lines = [
        f"### {s.metric}",
        "",
        f"{s.n_rows} rows, {s.method}; friedman statistic {s.statistic:.3f}, p = {_p(s.p_value)}"
        if s.method != "wilcoxon" else
        f"{s.n_rows} rows, wilcoxon signed-rank p = {_p(s.p_value)}",
        "",
        "| algorithm | rank | groups |",
        "|---|---:|---|",
    ]
    lines += [f"| {name} | {rank:.2f} | {letters} |" for name, rank, letters in s.ordered()]
    if s.note:
        lines += ["", f"note: {s.note}"]
    return "\n".join(lines) + "\n"


def render_pairs(summaries) -> str:
    """One line per metric: better-ranked solution, its rank, the other, its rank, p-value."""
    lines = ["| metric | best | rank | other | rank | p.value |", "|---|---|---:|---|---:|---:|"]
    for s in summaries:
        (a, ra, _), (b, rb, _) = s.ordered()
        lines.append(f"| {s.metric} | {a} | {ra:.2f} | {b} | {rb:.2f} | {_p(s.p_value)} |")
    notes = [f"note ({s.metric}): {s.note}" for s in summaries if s.note]
    if notes:
        lines += [""] + notes
    return "\n".join(lines) + "\n"


_ROW = re.compile(r"^\|\s*([^|]+?)\s*\|\s*([0-9.]+)\s*\|\s*([A-Za-z0-9]*)\s*\|$")


def parse_rank_table(text: str) -> dict:
    """Recover ``{metric: [(algorithm, rank, letters), ...]}`` from :func:`render_ranks` output."""
    out, metric = {}, None
    for line in text.splitlines():
        if line.startswith("### "):
            metric = line[4:].strip()
            out[metric] = []
            continue
        m = _ROW.match(line.strip())
        if m and metric is not None:
            out[metric].append((m.group(1), float(m.group(2)), m.group(3)))
    return out
