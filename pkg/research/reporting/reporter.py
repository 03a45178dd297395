# research/reporting/reporter.py

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List

import jinja2
import numpy as np
import pandas as pd

MARKDOWN_TEMPLATE = """# {{ report.title }}

{{ report.description }}

## Setup

* Cells run: {{ n_cells }} ({{ n_marked }} marked)
* Evaluation: pooled NRMSE of the final stage; forecast origins start at the first midnight of the evaluation range and follow back to back, one every horizon hours
* Values are percentages (lower is better)

## Final-stage NRMSE by training size ({{ analysis.first_horizon }} h horizon)

| Setup |{% for size in sizes.columns %} {{ size }} |{% endfor %}
|---|{% for size in sizes.columns %}---|{% endfor %}
{% for setup, row in sizes.iterrows() -%}
| {{ setup }} |{% for value in row %} {{ fmt(value) }} |{% endfor %}
{% endfor -%}
| seasonal naive |{% for size in sizes.columns %} {{ fmt(analysis.baseline[size]) }} |{% endfor %}

## Final-stage NRMSE by horizon ({{ analysis.largest_size }} of training data)

| Setup |{% for h in horizons.columns %} {{ h }} |{% endfor %}
|---|{% for h in horizons.columns %}---|{% endfor %}
{% for setup, row in horizons.iterrows() -%}
| {{ setup }} |{% for value in row %} {{ fmt(value) }} |{% endfor %}
{% endfor %}
## Key Findings

{% for size, setup in analysis.best_setup.items() -%}
* {{ size }}: best setup {{ setup if setup else "n/a" }}
{% endfor -%}
{% if analysis.marked_cells %}
## Marked Cells

{% for cell in analysis.marked_cells -%}
* {{ cell }}
{% endfor -%}
{% endif %}
"""

LATEX_TEMPLATE = r"""\begin{table}[ht]
\centering
\caption{Final-stage NRMSE (\%) by training data size, {{ analysis.first_horizon }}\,h horizon}
\begin{tabular}{l{% for size in sizes.columns %}r{% endfor %}}
\hline
Method/training data size{% for size in sizes.columns %} & {{ size }}{% endfor %} \\
\hline
{% for setup, row in sizes.iterrows() -%}
{{ tex(setup) }}{% for value in row %} & {{ fmt(value) }}{% endfor %} \\
{% endfor -%}
\hline
\end{tabular}
\end{table}

\begin{table}[ht]
\centering
\caption{Final-stage NRMSE (\%) by horizon, {{ analysis.largest_size }} of training data}
\begin{tabular}{l{% for h in horizons.columns %}r{% endfor %}}
\hline
Method{% for h in horizons.columns %} & {{ h }} forecast{% endfor %} \\
\hline
{% for setup, row in horizons.iterrows() -%}
{{ tex(setup) }}{% for value in row %} & {{ fmt(value) }}{% endfor %} \\
{% endfor -%}
\hline
\end{tabular}
\end{table}
"""


@dataclass
class SweepReport:
    """Container for sweep report data"""
    title: str
    description: str
    results: List[Dict[str, Any]]
    analysis: Dict[str, Any]
    experiment_id: str


def _fmt(value: Any) -> str:
    try:
        value = float(value)
    except (TypeError, ValueError):
        return "n/a"
    return f"{value:.2f}" if np.isfinite(value) else "n/a"


def _tex(text: str) -> str:
    return str(text).replace("_", r"\_").replace("%", r"\%")


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, pd.DataFrame):
        return {col: {idx: (None if pd.isna(v) else float(v)) for idx, v in obj[col].items()} for col in obj.columns}
    if isinstance(obj, np.generic):
        return obj.item()
    return str(obj)


class SweepReporter:
    """Writes sweep results as CSV, JSON, Markdown and LaTeX"""

    def __init__(self, output_dir: str = "research/sweep_output"):
        self.output_dir = Path(output_dir)

    def generate_report(self, results: List[Dict[str, Any]], analysis: Dict[str, Any],
                        experiment_id: str = "sweep") -> SweepReport:
        return SweepReport(
            title="Stacked Booster Network: Training Size and Horizon Sweep",
            description="Instant forecaster and booster stacks trained on increasing amounts of "
                        "history and evaluated on the final year of data.",
            results=results,
            analysis=analysis,
            experiment_id=experiment_id,
        )

    def render_markdown(self, report: SweepReport) -> str:
        template = jinja2.Template(MARKDOWN_TEMPLATE)
        return template.render(report=report, analysis=report.analysis,
                               sizes=report.analysis["sizes"], horizons=report.analysis["horizons"],
                               n_cells=len(report.results),
                               n_marked=len(report.analysis.get("marked_cells", [])), fmt=_fmt)

    def render_latex(self, report: SweepReport) -> str:
        template = jinja2.Template(LATEX_TEMPLATE)
        return template.render(analysis=report.analysis, sizes=report.analysis["sizes"],
                               horizons=report.analysis["horizons"], fmt=_fmt, tex=_tex)

    def save_report(self, report: SweepReport) -> Path:
        """
        Write every report file into output_dir/experiment_id

        Files contain no timestamps, so reruns with the same seeds are byte-identical.

        Returns:
            Path: the experiment directory
        """
        experiment_dir = self.output_dir / report.experiment_id
        experiment_dir.mkdir(parents=True, exist_ok=True)
        print(f"Saving report to: {experiment_dir}")

        pd.DataFrame(report.results).to_csv(experiment_dir / "sweep_cells.csv", index=False)
        report.analysis["sizes"].to_csv(experiment_dir / "table_sizes.csv", float_format="%.4f")
        report.analysis["horizons"].to_csv(experiment_dir / "table_horizons.csv", float_format="%.4f")

        summary = {k: v for k, v in report.analysis.items()}
        with open(experiment_dir / "analysis_summary.json", "w", encoding="utf-8") as f:
            json.dump(summary, f, indent=2, default=_jsonable, sort_keys=True)

        (experiment_dir / "sweep_report.md").write_text(self.render_markdown(report), encoding="utf-8")
        (experiment_dir / "sweep_tables.tex").write_text(self.render_latex(report), encoding="utf-8")

        for name in self.expected_files():
            path = experiment_dir / name
            print(f"- {name} ({path.stat().st_size} bytes)")
        return experiment_dir

    @staticmethod
    def expected_files() -> List[str]:
        return ["sweep_cells.csv", "table_sizes.csv", "table_horizons.csv",
                "analysis_summary.json", "sweep_report.md", "sweep_tables.tex"]
