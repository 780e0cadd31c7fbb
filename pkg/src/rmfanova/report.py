"""Test report container and its serializations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .manova import StatisticValue

__all__ = ["TestReport", "format_reports", "fmt_num", "fmt_p"]


def fmt_num(x: float) -> str:
    """Six significant digits."""
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return "nan"
    return f"{x:.6g}"


def fmt_p(p: float) -> str:
    """Four decimals, with ``<0.0001`` below the printable range."""
    if p is None or np.isnan(p):
        return "nan"
    if p < 0.0001:
        return "<0.0001"
    return f"{p:.4f}"


@dataclass
class TestReport:
    """Result of one hypothesis test by one method."""

    __test__ = False  # not a pytest class

    hypothesis: str
    method: str
    statistics: list[StatisticValue]
    dims: dict[str, int]
    notes: list[str] = field(default_factory=list)
    sphericity: Any = None
    epsilon: float | None = None

    def statistic(self, kind: str) -> StatisticValue:
        for s in self.statistics:
            if s.kind == kind:
                return s
        raise KeyError(kind)

    def p_value(self, kind: str = "W") -> float:
        return self.statistic(kind).p_value

    def to_dict(self) -> dict:
        out = {
            "hypothesis": self.hypothesis,
            "method": self.method,
            "dims": dict(self.dims),
            "statistics": [s.to_dict() for s in self.statistics],
            "notes": list(self.notes),
        }
        if self.epsilon is not None:
            out["epsilon"] = self.epsilon
        if self.sphericity is not None:
            out["sphericity"] = self.sphericity.to_dict()
        return out

    def to_json(self) -> str:
        return json.dumps(_round_floats(self.to_dict()), sort_keys=True)

    def to_text(self) -> str:
        d = self.dims
        head = (f"{self.method} | hypothesis={self.hypothesis} | "
                + " ".join(f"{k}={d[k]}" for k in ("n", "g", "m", "p", "s", "q") if k in d))
        lines = [head, f"  {'stat':<4} {'value':>12} {'F':>12} {'df1':>10} {'df2':>10} {'p-value':>9}"]
        for s in self.statistics:
            mark = " (lower bound)" if s.p_value_is_bound else ""
            lines.append(f"  {s.kind:<4} {fmt_num(s.value):>12} {fmt_num(s.f_stat):>12} "
                         f"{fmt_num(s.df1):>10} {fmt_num(s.df2):>10} {fmt_p(s.p_value):>9}{mark}")
        if self.sphericity is not None:
            sp = self.sphericity
            lines.append(f"  sphericity: LR={fmt_num(sp.lr_statistic)} df={sp.df} "
                         f"p={fmt_p(sp.p_value)} epsilon={fmt_num(sp.epsilon)}")
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


def _round_floats(obj):
    # 12 significant digits make the record stream stable across BLAS builds
    if isinstance(obj, float):
        if np.isnan(obj) or np.isinf(obj):
            return str(obj)
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round_floats(obj.item())
    return obj


def format_reports(reports: list[TestReport]) -> str:
    return "\n\n".join(r.to_text() for r in reports) + "\n"
