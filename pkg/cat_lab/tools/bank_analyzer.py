"""
Bank Analyzer - Riepilogo e diagnostica di una banca di item
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from cat_lab.core.errors import BankFormatError
from cat_lab.core.irt_core import Item

Range = Optional[Tuple[float, float]]


@dataclass
class BankAnalysis:
    """Risultato analisi banca"""
    path: str
    count: int
    a_range: Range
    b_range: Range
    c_range: Range
    issues: List[BankFormatError] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.issues and self.count > 0


class BankAnalyzer:
    """Analizza le righe di una banca di item"""

    @staticmethod
    def analyze(items: Sequence[Item], issues: Sequence[BankFormatError], path: str = "") -> BankAnalysis:
        """
        Args:
            items: item validi (da BankReader.parse_items)
            issues: errori di riga raccolti in lettura

        Returns:
            BankAnalysis con conteggio e range dei parametri
        """
        def span(values: List[float]) -> Range:
            return (min(values), max(values)) if values else None

        return BankAnalysis(
            path=path,
            count=len(items),
            a_range=span([it.a for it in items]),
            b_range=span([it.b for it in items]),
            c_range=span([it.c for it in items]),
            issues=sorted(issues, key=lambda issue: issue.line),
        )

    @staticmethod
    def format_for_console(analysis: BankAnalysis) -> str:
        """Report testuale della banca"""
        def fmt(r: Range) -> str:
            return f"[{r[0]:g}, {r[1]:g}]" if r else "-"

        lines = [
            f"Banca: {analysis.path}",
            f"  Item validi: {analysis.count}",
            f"  a: {fmt(analysis.a_range)}",
            f"  b: {fmt(analysis.b_range)}",
            f"  c: {fmt(analysis.c_range)}",
        ]
        if analysis.issues:
            lines.append(f"  Righe non valide: {len(analysis.issues)}")
            lines.extend(f"    - {issue}" for issue in analysis.issues)
        elif analysis.count == 0:
            lines.append("  Nessun item nella banca")
        return "\n".join(lines)
