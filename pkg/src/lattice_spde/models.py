"""Data models for command outputs."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class OutputFile:
    """A file written by a command."""

    name: str
    path: Path
    size: int = 0

    def __str__(self) -> str:
        return f"{self.name} ({self.size} bytes)"


@dataclass
class CommandResult:
    """Result of one CLI command."""

    command: str
    outputs: list[OutputFile] = field(default_factory=list)
