"""
fedregret - Console Display
rich tables and panels for CLI summaries. Nothing here affects the CSV outputs.
"""

from __future__ import annotations

from typing import Any, Sequence

from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.style import Style
from rich.table import Table
from rich.text import Text

from config import Config, get_config


class ResultsConsole:
    """Renders result summaries of the CLI subcommands."""

    def __init__(self, config: Config | None = None, console: Console | None = None) -> None:
        self.config = config or get_config()
        self.console = console or Console()
        self._setup_styles()

    def _setup_styles(self) -> None:
        theme = self.config.theme
        self.styles = {
            "accent": Style(color=theme.accent_color, bold=True),
            "dim": Style(color=theme.dim_text_color),
            "success": Style(color=theme.success_color),
            "warning": Style(color=theme.warning_color),
            "error": Style(color=theme.error_color),
            "info": Style(color=theme.info_color),
        }

    def render_table(self, title: str, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> Table:
        """Print a table; floats are shown with six significant digits."""
        table = Table(
            title=title,
            title_style=self.styles["accent"],
            box=box.SIMPLE_HEAVY,
            border_style=self.config.theme.border_style,
        )
        for i, column in enumerate(columns):
            table.add_column(column, justify="left" if i == 0 else "right")
        for row in rows:
            table.add_row(*(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
        self.console.print(table)
        return table

    def render_weights(self, sharing: Any) -> Table:
        rows = [
            (str(i), float(s), float(p), float(w))
            for i, (s, p, w) in enumerate(zip(sharing.scores, sharing.prior, sharing.posterior), start=1)
        ]
        return self.render_table(f"Sharing weights (eta={sharing.eta:g})", ["dataset", "score", "prior", "posterior"], rows)

    def render_converge(self, finals: Sequence[tuple[str, int, float, float]]) -> Table:
        """finals: (method, seed, initial loss, final loss)."""
        rows = [(m, s, l0, lT, lT / l0 if l0 > 0 else 0.0) for m, s, l0, lT in finals]
        return self.render_table("Convergence", ["method", "seed", "initial loss", "final loss", "ratio"], rows)

    def render_pricing(self, table: Any) -> Table:
        rows = [(r.method, r.RP, r.ci_low, r.ci_high, r.mean_price, r.n_runs) for r in table.rows]
        return self.render_table("Relative performance", ["method", "RP", "ci_low", "ci_high", "mean_price", "n_runs"], rows)

    def render_robustness(self, max_ratio: float, median_ratio: float, cells: int) -> Table:
        return self.render_table(
            "Robustness",
            ["cells", "max ratio", "median ratio"],
            [(cells, max_ratio, median_ratio)],
        )

    def render_bench(self, rows: Sequence[Any]) -> Table:
        data = [(r.n_datasets, r.feature_dim, r.horizon, r.t_ro, r.t_aro, r.ratio) for r in rows]
        return self.render_table("Timing", ["N", "p", "T", "t_ro [s]", "t_aro [s]", "ratio"], data)

    def render_error(self, message: str, title: str = "Error") -> None:
        self.console.print(
            Panel(
                Text(message, style=self.styles["error"]),
                border_style=self.config.theme.error_color,
                title=title,
                title_align="left",
                padding=(0, 1),
            )
        )

    def render_success(self, message: str, title: str = "Done") -> None:
        self.console.print(
            Panel(
                Text(message, style=self.styles["success"]),
                border_style=self.config.theme.success_color,
                title=title,
                title_align="left",
                padding=(0, 1),
            )
        )


__all__ = ["ResultsConsole"]
