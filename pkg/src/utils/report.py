"""Deterministic text and CSV reports for solver results."""

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

logger = logging.getLogger(__name__)

NU_DECIMALS = 2


def format_value(value: Any, decimals: int = -1) -> str:
    """Human-readable value; floats use `decimals` places when given."""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if decimals >= 0:
            return f"{value:.{decimals}f}"
        return f"{value:.6g}"
    if isinstance(value, (list, tuple)):
        return "(" + ", ".join(format_value(v, decimals) for v in value) + ")"
    if value is None:
        return "none"
    return str(value)


@dataclass
class Report:
    """Title, ordered key = value entries and a full-precision appendix."""
    title: str
    entries: List[Tuple[str, str]] = field(default_factory=list)
    appendix: List[Tuple[str, str]] = field(default_factory=list)

    def add(self, key: str, value: Any, decimals: int = -1) -> 'Report':
        self.entries.append((key, format_value(value, decimals)))
        return self

    def add_nu(self, key: str, value: float) -> 'Report':
        """Entry for a value of nu, with the full value in the appendix."""
        self.add(key, float(value), NU_DECIMALS)
        return self.attach(key, value)

    def attach(self, key: str, value: Any) -> 'Report':
        """Machine-readable appendix entry."""
        if isinstance(value, (list, tuple)):
            text = "[" + ", ".join(repr(float(v)) if isinstance(v, float) else repr(v) for v in value) + "]"
        else:
            text = repr(float(value)) if isinstance(value, float) else repr(value)
        self.appendix.append((key, text))
        return self

    def render_text(self) -> str:
        lines = [self.title, ""]
        lines.extend(f"{key} = {value}" for key, value in self.entries)
        if self.appendix:
            lines.extend(["", "[appendix]"])
            lines.extend(f"{key} = {value}" for key, value in self.appendix)
        return "\n".join(lines) + "\n"

    def render_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["section", "key", "value"])
        writer.writerows(("report", key, value) for key, value in self.entries)
        writer.writerows(("appendix", key, value) for key, value in self.appendix)
        return buffer.getvalue()

    def render(self, fmt: str = "text") -> str:
        """Render as 'text' or 'csv'."""
        if fmt == "csv":
            return self.render_csv()
        return self.render_text()

    def to_dict(self) -> Dict[str, Any]:
        """Convert report to dictionary."""
        return {'title': self.title, 'entries': dict(self.entries), 'appendix': dict(self.appendix)}
