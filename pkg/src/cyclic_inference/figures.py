"""Optional matplotlib rendering of experiment tables.

The command-line driver calls ``render`` only when asked (--plots); the
default report path stays data-only.  One PNG per plottable table, written
next to the CSVs.  Figures are diagnostic companions to the delimited
output, not part of the byte-stable report contract.
"""

from __future__ import annotations

import os


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _columns(table):
    cols, rows = table
    series = {name: [row[i] for row in rows] for i, name in enumerate(cols)}
    return cols, series


def _is_numeric(values) -> bool:
    return all(isinstance(v, (int, float)) for v in values)


def render(result, outdir) -> list:
    """Write one figure per recognizable table; returns the file names."""
    plt = _pyplot()
    written = []
    for table_name, table in sorted(result.tables.items()):
        cols, series = _columns(table)
        fig = None
        if cols[0] in ("epsilon", "dt") and len(series[cols[0]]) > 1:
            # convergence-style table: everything numeric against the step
            fig, ax = plt.subplots(figsize=(5, 3.5))
            x = series[cols[0]]
            for name in cols[1:]:
                if _is_numeric(series[name]) and min(series[name]) > 0:
                    ax.loglog(x, series[name], marker="o", label=name)
            ax.set_xlabel(cols[0])
            ax.legend(fontsize=8)
        elif "deviation" in cols and cols[0] == "instance":
            fig, ax = plt.subplots(figsize=(5, 3.5))
            ax.hist(series["deviation"], bins=20)
            ax.set_xlabel("deviation")
            ax.set_ylabel("instances")
        elif cols[0] == "t" and "deviation" in cols:
            fig, ax = plt.subplots(figsize=(5, 3.5))
            ax.plot(series["t"], series["deviation"])
            ax.set_xlabel("t")
            ax.set_ylabel("deviation from the exact propagator")
        elif cols[0] == "z":
            fig, ax = plt.subplots(figsize=(5, 3.5))
            ax.plot(series["z"], series["gap"], label="measured gap")
            ax.plot(series["z"], series["cube"], "--", label="|z|^3")
            ax.set_xlabel("z")
            ax.legend(fontsize=8)
        elif cols == ("quantity", "value"):
            numeric = [(q, v) for q, v in zip(series["quantity"],
                                              series["value"])
                       if isinstance(v, float) and v > 0]
            fig, ax = plt.subplots(figsize=(5, 3.5))
            ax.bar(range(len(numeric)), [v for _, v in numeric], log=True)
            ax.set_xticks(range(len(numeric)),
                          [q for q, _ in numeric], rotation=30, fontsize=7,
                          ha="right")
            ax.set_ylabel("J")
        if fig is None:
            continue
        ax.set_title(f"{result.name}: {table_name}", fontsize=10)
        fig.tight_layout()
        name = f"{result.name}__{table_name}.png"
        fig.savefig(os.path.join(outdir, name), dpi=110)
        plt.close(fig)
        written.append(name)
    return written
