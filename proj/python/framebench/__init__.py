"""Python interface to the framebench native core."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from os import PathLike
from typing import Any, Sequence

from . import _framebench
from ._framebench import (
    ConfigError,
    DegenerateDataError,
    DomainError,
    FramebenchError,
    StructuralError,
    auroc,
    cramers_v,
    fleiss_kappa,
    format_sig,
    score,
    set_log_level,
    wald_half_width,
    wilson_interval,
)

__all__ = [
    "CommandResult",
    "ConfigError",
    "DegenerateDataError",
    "DomainError",
    "FramebenchError",
    "StructuralError",
    "analyze_game",
    "auroc",
    "canonical_pd",
    "cramers_v",
    "fleiss_kappa",
    "format_sig",
    "run",
    "score",
    "set_log_level",
    "wald_half_width",
    "wilson_interval",
]

COMMANDS = ("generate", "evaluate", "judge", "analyze", "predict", "report")


@dataclass
class CommandResult:
    exit_code: int
    message: str
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.exit_code == 0


def canonical_pd() -> dict[str, Any]:
    """Payoff matrix of the canonical Prisoner's Dilemma as a JSON-style dict."""
    return json.loads(_framebench.canonical_pd_json())


def analyze_game(matrix: dict[str, Any] | str) -> dict[str, Any]:
    """Strict dominance, pure Nash equilibria and the PD check for a 2-player matrix.

    `matrix` is either a payoff dict or the name of a built-in matrix ("canonical_pd").
    """
    return json.loads(_framebench.analyze_game_json(json.dumps(matrix)))


def run(
    command: str,
    config: str | PathLike[str],
    *,
    fresh: bool = False,
    models: Sequence[str] = (),
    embeddings: str | PathLike[str] | None = None,
    shuffle_labels: bool = False,
) -> CommandResult:
    """Run one pipeline stage against a run configuration file."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    code, message, details = _framebench.run_command(
        command,
        str(config),
        fresh,
        list(models),
        None if embeddings is None else str(embeddings),
        shuffle_labels,
    )
    return CommandResult(code, message, json.loads(details))
