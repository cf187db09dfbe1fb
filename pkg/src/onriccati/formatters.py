"""
Formatting utilities for displaying solver results and experiment summaries.
"""

import os
from typing import Dict, List, Sequence

import numpy as np

from .riccati import DareSolution


class ConsoleFormatter:
    """Formatter for console output."""

    # ANSI color codes
    COLORS = {
        "reset": "\033[0m",
        "bold": "\033[1m",
        "red": "\033[31m",
        "green": "\033[32m",
    }

    @staticmethod
    def supports_color() -> bool:
        """Check if terminal supports colors."""
        # Check if NO_COLOR is set (see https://no-color.org/)
        if os.environ.get("NO_COLOR") is not None:
            return False

        return os.isatty(1)

    @staticmethod
    def color_text(text: str, color: str) -> str:
        """
        Color text if terminal supports colors.

        Args:
            text: Text to color
            color: Color name from COLORS dict

        Returns:
            Colored string if supported, original string otherwise
        """
        if not ConsoleFormatter.supports_color():
            return text

        color_code = ConsoleFormatter.COLORS.get(color, "")
        reset = ConsoleFormatter.COLORS["reset"]
        return f"{color_code}{text}{reset}"

    @staticmethod
    def format_matrix(M, indent: int = 4, precision: int = 12) -> str:
        """Rows of ``M`` right-aligned with ``precision`` significant digits."""
        mat = np.atleast_2d(np.asarray(M, dtype=float))
        cells = [[f"{v:.{precision}g}" for v in row] for row in mat]
        width = max(len(c) for row in cells for c in row)
        pad = " " * indent
        return "\n".join(pad + "  ".join(c.rjust(width) for c in row) for row in cells)

    @staticmethod
    def format_dare_solution(solution: DareSolution) -> str:
        """
        Format a DARE solution: P*, K*, residual and iteration count.

        Args:
            solution: Result of ``solve_dare``

        Returns:
            Formatted string for display
        """
        lines = [
            ConsoleFormatter.color_text("P*:", "bold"),
            ConsoleFormatter.format_matrix(solution.P_star),
            ConsoleFormatter.color_text("K*:", "bold"),
            ConsoleFormatter.format_matrix(solution.K_star),
            f"residual:   {solution.residual:.3e}",
            f"iterations: {solution.iterations}",
        ]
        if solution.bootstrap_steps:
            steps = solution.bootstrap_steps
            lines.append(f"bootstrap:  {steps} value-iteration steps")
        return "\n".join(lines)

    @staticmethod
    def format_summary(rows: Sequence[Dict], horizon: int) -> str:
        """
        Format the per-algorithm summary table of a bench or online run.

        Args:
            rows: Output of ``RegretLedger.summary``
            horizon: Horizon T the regrets refer to

        Returns:
            Formatted table
        """
        if not rows:
            return "No algorithms ran."

        header = (
            f"{'ALGORITHM':10} {'R(T)':>14} {'R(T)/T':>14} "
            f"{'MAX RHO':>10} {'MAX EIG(P)':>14} {'STATUS':>8}"
        )
        result = [ConsoleFormatter.color_text(header, "bold"), "-" * len(header)]
        for row in rows:
            status = (
                ConsoleFormatter.color_text("failed", "red") if row["failed"]
                else ConsoleFormatter.color_text("ok", "green")
            )
            result.append(
                f"{row['algorithm']:10} {row['final_regret']:14.6g} "
                f"{row['average_regret']:14.6g} {row['max_rho']:10.6f} "
                f"{row['max_pmax']:14.6g} {status:>8}"
            )
        result.append(f"T = {horizon}")
        for row in rows:
            if "gain_gap" in row:
                result.append(
                    f"||K_T - K*|| ({row['algorithm']}): {row['gain_gap']:.3e}"
                )
        return "\n".join(result)

    @staticmethod
    def format_checkpoints(checkpoints: Dict[int, Dict[str, float]]) -> str:
        """Regret R(T) of each algorithm at each checkpoint horizon."""
        if not checkpoints:
            return ""
        names = list(next(iter(checkpoints.values())))
        header = f"{'T':>8} " + " ".join(f"{name:>14}" for name in names)
        lines = [ConsoleFormatter.color_text(header, "bold")]
        for horizon in sorted(checkpoints):
            values = checkpoints[horizon]
            cells = " ".join(f"{values[name]:14.6g}" for name in names)
            lines.append(f"{horizon:>8} {cells}")
        return "\n".join(lines)

    @staticmethod
    def format_probe(trials: List) -> str:
        """
        Format boundedness probe results, one line per trial.

        Args:
            trials: ``ProbeTrial`` objects

        Returns:
            Formatted table with a trailing count of flagged trials
        """
        if not trials:
            return "No trials ran."

        header = f"{'TRIAL':>6} {'MAX EIG(P)':>14} {'BOUND':>14} {'STATUS':>8}"
        lines = [ConsoleFormatter.color_text(header, "bold")]
        for trial in trials:
            bound = "-" if trial.bound is None else f"{trial.bound:.6g}"
            if trial.flagged:
                status = ConsoleFormatter.color_text("flagged", "red")
            else:
                status = ConsoleFormatter.color_text("ok", "green")
            lines.append(
                f"{trial.trial:>6} {trial.max_eig:14.6g} {bound:>14} {status:>8}"
            )
        flagged = sum(1 for trial in trials if trial.flagged)
        color = "red" if flagged else "green"
        footer = f"{flagged} of {len(trials)} trials flagged"
        lines.append(ConsoleFormatter.color_text(footer, color))
        return "\n".join(lines)
