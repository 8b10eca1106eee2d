"""The worked example family and the reproduction of its published tables.

The system is x -> A x with A = [[1, 1], [1/4, 1]], phi(x) = x2^2 - x1^2 + p*x1
and X^in the segment from (2*mu, mu) to (1, 1/2). Along that segment
A^n(2y, y) = (3/2)^n (2y, y), so every static problem reduces to the concave
quadratic phi_n(y) = p^2/3 - 3*((3/2)^n * y - p/3)^2 on [mu, 1/2].
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

from ..errors import ParameterError
from .lyapunov import CompatibilityCertificate, PsdFunction, certificate_from_margins
from .pairs import MonotoneBijection, UsefulPair, formula_F, solve_stop, verify_pair
from .sequences import ARGMAX_TOLERANCE, BoundedSequence, greatest_maximizer
from .settings import SolverSettings
from .systems import DynamicalSystem, InitialSet, nu_oracle

logger = logging.getLogger(__name__)

WORKED_MATRIX = ((1.0, 1.0), (0.25, 1.0))
WORKED_OBJECTIVE = "x2^2 - x1^2 + p*x1"
LYAPUNOV_TEXT = ("piecewise(abs(x1 - 2*x2) <= 1e-9*(abs(x1) + abs(x2)) and abs(x1) + abs(x2) > 0: "
                 "2*mu^2/(x1*x2), else: 0)")
LYAPUNOV_LAMBDA = 5.0 / 9.0
LYAPUNOV_RATIO = 4.0 / 9.0
GROWTH = 1.5
ARTIFACT_HORIZON = 250
NUMERIC_ARGMAX_TOLERANCE = 1e-4
TABLE_COLUMNS = 7
FORMULA_COLUMNS = 5

TABLE_GRID: Tuple[Tuple[float, str], ...] = tuple(
    (p, mu) for p in (30.0, 9.0, 3.0) for mu in ("1/3", "1/10", "1/1000")
)


@dataclass(frozen=True)
class ExampleParams:
    """Parameters p >= 3/2 and mu in (0, 1/3]."""
    p: float
    mu: float

    def __post_init__(self):
        if not self.p >= 1.5:
            raise ParameterError(f"p must be at least 3/2, got {self.p}")
        if not 0.0 < self.mu <= 1.0 / 3.0:
            raise ParameterError(f"mu must lie in (0, 1/3], got {self.mu}")

    @property
    def mu_label(self) -> str:
        """mu as a short fraction such as 1/10."""
        return str(Fraction(self.mu).limit_denominator(100000))

    @property
    def label(self) -> str:
        return f"p={self.p:g}, mu={self.mu_label}"

    @classmethod
    def from_text(cls, p: float, mu: str) -> 'ExampleParams':
        """Params with mu written as a fraction."""
        return cls(float(p), float(Fraction(mu)))


@dataclass(frozen=True)
class ClosedForms:
    """Closed-form nu and the indices that structure it."""
    params: ExampleParams
    n_lower: int
    n_upper: int
    n_zero: int

    @property
    def plateau(self) -> float:
        """The optimal value p^2/3."""
        return self.params.p ** 2 / 3.0

    @property
    def n_zero_last(self) -> int:
        """Last index with phi_n(mu) >= 0; the n_0 used by the canonical pairs."""
        return self.n_zero - 1

    @property
    def K_s(self) -> int:
        return self.n_upper - 1

    def gap(self, n: int, y: float) -> float:
        """phi_n(y) - p^2/3, without cancellation."""
        return -3.0 * (GROWTH ** n * y - self.params.p / 3.0) ** 2

    def phi_n(self, n: int, y: float) -> float:
        """phi(A^n (2y, y))."""
        c = GROWTH ** n
        return -3.0 * c * c * y * y + 2.0 * self.params.p * c * y

    def _branch(self, n: int) -> Optional[float]:
        if n < self.n_lower:
            return 0.5
        if n < self.n_upper:
            return None
        return self.params.mu

    def nu_gap(self, n: int) -> float:
        """nu_n - p^2/3."""
        y = self._branch(n)
        return 0.0 if y is None else self.gap(n, y)

    def nu(self, n: int) -> float:
        y = self._branch(n)
        return self.plateau if y is None else self.phi_n(n, y)

    def n_star(self, y: float) -> int:
        """max(floor(ln(4p/(15y))/ln(3/2)) + 1, 0)."""
        if not y > 0:
            raise ParameterError(f"n_star needs y > 0, got {y}")
        return max(math.floor(math.log(4.0 * self.params.p / (15.0 * y)) / math.log(GROWTH)) + 1, 0)

    @property
    def epsilon(self) -> float:
        """8 mu^2 (2/3)^(2 n_upper - 1)."""
        return 8.0 * self.params.mu ** 2 * (2.0 / 3.0) ** (2 * self.n_upper - 1)

    @property
    def margin(self) -> float:
        """p^2/3 minus the best value outside the plateau."""
        return -max(self.gap(self.n_star(0.5), 0.5), self.gap(self.n_upper, self.params.mu))

    def zeta(self, divisor: float) -> float:
        return self.margin / divisor

    def tail_bound(self, k: int) -> float:
        # nu is constant on the plateau and decreasing after it.
        return self.plateau if k + 1 < self.n_upper else self.nu(k + 1)

    def sequence(self) -> BoundedSequence:
        """nu as a sequence carrying its exact tail bound."""
        return BoundedSequence(self.nu, self.tail_bound, label="nu")

    def gap_sequence(self) -> BoundedSequence:
        """nu - p^2/3, exact on the plateau."""
        return BoundedSequence(self.nu_gap, lambda k: self.tail_bound(k) - self.plateau,
                               label="nu - p^2/3")

    def values(self, K: int) -> List[float]:
        return [self.nu(n) for n in range(K + 1)]


def closed_forms(params: ExampleParams) -> ClosedForms:
    """Index formulas and the piecewise nu for the worked example."""
    p, mu = params.p, params.mu
    ratio = math.log(2.0 / 3.0)
    n_lower = math.floor(math.log(3.0 / (2.0 * p)) / ratio) + 1
    n_upper = math.floor(math.log(3.0 * mu / p) / ratio) + 1
    n_zero = math.floor(math.log(2.0 * p / (3.0 * mu)) / math.log(GROWTH)) + 1
    logger.debug(f"{params.label}: n_lower={n_lower}, n_upper={n_upper}, n_zero={n_zero}")
    return ClosedForms(params, n_lower, n_upper, n_zero)


def worked_example_system(params: ExampleParams) -> DynamicalSystem:
    """The linear system of the worked example with its segment of initial states."""
    initial = InitialSet.segment((2.0 * params.mu, params.mu), (1.0, 0.5))
    return DynamicalSystem.from_expressions(None, WORKED_OBJECTIVE, initial, {"p": params.p},
                                            matrix=WORKED_MATRIX, label=f"worked example {params.label}")


class ArtifactChoice(Enum):
    PAIR_A = "pairA"
    PAIR_B = "pairB"
    LYAPUNOV = "lyapunov"
    CERTIFICATE = "certificate"
    H_ZETA = "h_zeta"


Artifact = Union[UsefulPair, PsdFunction, CompatibilityCertificate]


def _check_zeta(forms: ClosedForms, zeta: Optional[float]) -> float:
    if zeta is None:
        raise ParameterError("zeta is required for this construction")
    if not 0.0 < zeta < forms.margin:
        raise ParameterError(f"zeta must lie in (0, {forms.margin!r}), got {zeta}")
    return zeta


def linear_pair_envelope(forms: ClosedForms, choice: ArtifactChoice) -> Tuple[MonotoneBijection, float]:
    """(h, beta) of pair A (a = p^2) or pair B (a = 2p^2/3)."""
    p, n0 = forms.params.p, forms.n_zero_last
    if choice is ArtifactChoice.PAIR_A:
        return MonotoneBijection.linear(p ** 2), (2.0 / 3.0) ** (1.0 / n0)
    return MonotoneBijection.linear(2.0 * p ** 2 / 3.0), 0.5 ** (1.0 / n0)


def canonical_artifacts(params: ExampleParams, choice: Union[ArtifactChoice, str],
                        zeta: Optional[float] = None,
                        horizon: int = ARTIFACT_HORIZON) -> Artifact:
    """One of the constructions of the worked example, ready for verification."""
    choice = ArtifactChoice(choice)
    forms = closed_forms(params)

    if choice in (ArtifactChoice.PAIR_A, ArtifactChoice.PAIR_B):
        h, beta = linear_pair_envelope(forms, choice)
        return verify_pair(forms.sequence(), h, beta, horizon)

    if choice is ArtifactChoice.LYAPUNOV:
        return PsdFunction.from_expression(LYAPUNOV_TEXT, 2, {"mu": params.mu},
                                           positivity_witness=(2.0 * params.mu, params.mu))

    if choice is ArtifactChoice.CERTIFICATE:
        eta = forms.zeta(2.0) if zeta is None else _check_zeta(forms, zeta)
        return certificate_from_margins(forms.plateau, forms.epsilon, eta)

    zeta = _check_zeta(forms, zeta)
    h = MonotoneBijection.affine(1.0, forms.plateau - min(zeta, forms.epsilon))
    return verify_pair(forms.sequence(), h, LYAPUNOV_RATIO, horizon)


class CellStatus(Enum):
    MATCH = "match"
    FLOAT_FLOOR = "floating-point floor"
    NOTED = "printed-value note"
    MISMATCH = "mismatch"


@dataclass
class TableCell:
    """A computed value next to the printed one."""
    value: Union[int, float, str]
    printed: Optional[Union[int, float, str]] = None
    status: CellStatus = CellStatus.MATCH
    note: str = ""
    flagged: bool = False

    @property
    def discrepant(self) -> bool:
        return self.status is not CellStatus.MATCH

    def text(self) -> str:
        value = f"{self.value:.2f}" if isinstance(self.value, float) else str(self.value)
        return value + ("*" if self.flagged else "") + ("!" if self.discrepant else "")


@dataclass
class TableRow:
    labels: List[str]
    cells: List[TableCell]


@dataclass
class Table:
    """A reproduced table with its discrepancy ledger."""
    number: int
    title: str
    header: List[str]
    rows: List[TableRow] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    def discrepancies(self) -> List[Tuple[TableRow, str, TableCell]]:
        """(row, column name, cell) for every cell that differs from the print."""
        width = len(self.header) - len(self.rows[0].cells) if self.rows else 0
        return [(row, self.header[width + i], cell)
                for row in self.rows for i, cell in enumerate(row.cells) if cell.discrepant]

    def unexplained(self) -> List[Tuple[TableRow, str, TableCell]]:
        return [d for d in self.discrepancies() if d[2].status is CellStatus.MISMATCH]

    @property
    def exit_status(self) -> int:
        return 1 if self.unexplained() else 0

    def _grid(self) -> List[List[str]]:
        return [self.header] + [row.labels + [c.text() for c in row.cells] for row in self.rows]

    def _ledger(self) -> List[List[str]]:
        lines = []
        for row, column, cell in self.discrepancies():
            kind = cell.status.value + (f": {cell.note}" if cell.note else "")
            lines.append([" ".join(row.labels), column, str(cell.value), str(cell.printed), kind])
        return lines

    def render_text(self) -> str:
        grid = self._grid()
        labels = len(self.rows[0].labels) if self.rows else 0
        widths = [max(len(line[i]) for line in grid) for i in range(len(self.header))]
        out = [f"Table {self.number}. {self.title}", ""]
        for line in grid:
            parts = [v.ljust(w) if i < labels else v.rjust(w)
                     for i, (v, w) in enumerate(zip(line, widths))]
            out.append("  ".join(parts).rstrip())
        out.append("")
        if any(c.flagged for row in self.rows for c in row.cells):
            out.append("* not computed in practice: nu_k lies below an earlier term")
        ledger = self._ledger()
        if not ledger:
            out.append("Discrepancies: none")
        else:
            out.append("Discrepancies (! in the table):")
            for where, column, value, printed, kind in ledger:
                out.append(f"  {where} [{column}]: computed {value}, printed {printed} ({kind})")
        for note in self.notes:
            out.append(f"Note: {note}")
        return "\n".join(out) + "\n"

    def render_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerows(self._grid())
        ledger = self._ledger()
        if ledger:
            writer.writerow([])
            writer.writerow(["row", "column", "computed", "printed", "kind"])
            writer.writerows(ledger)
        for note in self.notes:
            writer.writerow(["note", note])
        return buffer.getvalue()


# Values as printed, keyed by (p, mu).
PRINTED_TABLE_1: Dict[Tuple[float, str], Tuple[Tuple[float, ...], str]] = {
    (30.0, "1/3"): ((29.25, 43.31, 63.70, 92.71, 132.65, 184.56, 244.41), "8 : 300"),
    (30.0, "1/10"): ((29.25, 43.31, 63.70, 92.71, 132.65, 184.56, 244.41), "11 : 300"),
    (30.0, "1/1000"): ((29.25, 43.31, 63.70, 92.71, 132.65, 184.56, 244.41), "22 : 300"),
    (9.0, "1/3"): ((8.25, 11.81, 16.45, 21.83, 26.34, 27.0, 25.09), "5 : 27"),
    (9.0, "1/10"): ((8.25, 11.81, 16.45, 21.83, 26.34, 27.0, 27.0), "8 : 27"),
    (9.0, "1/1000"): ((8.25, 11.81, 16.45, 21.83, 26.34, 27.0, 27.0), "19 : 27"),
    (3.0, "1/3"): ((2.25, 2.81, 3.0, 2.95, 1.58, -4.03, -20.47), "2 : 3"),
    (3.0, "1/10"): ((2.25, 2.81, 3.0, 3.0, 3.0, 3.0, 2.94), "5 : 3"),
    (3.0, "1/1000"): ((2.25, 2.81, 3.0, 3.0, 3.0, 3.0, 3.0), "17 : 3"),
}

# (n_lower, n_upper, n_0), pair A floors k = 0..4 and K^s, pair B likewise.
PRINTED_TABLE_2: Dict[Tuple[float, str], Tuple[Tuple[int, ...], Tuple[int, ...], Tuple[int, ...]]] = {
    (30.0, "1/3"): ((8, 9, 10), (84, 74, 65, 56, 47, 27), (43, 37, 32, 26, 21, 9)),
    (30.0, "1/10"): ((8, 12, 13), (97, 84, 72, 61, 50, 35), (56, 49, 42, 35, 28, 12)),
    (30.0, "1/1000"): ((8, 23, 24), (202, 179, 156, 131, 113, 65), (104, 91, 77, 64, 52, 23)),
    (9.0, "1/3"): ((5, 6, 7), (39, 33, 27, 22, 19, 18), (18, 15, 12, 9, 7, 7)),
    (9.0, "1/10"): ((5, 9, 10), (56, 47, 39, 32, 27, 27), (27, 21, 17, 13, 10, 9)),
    (9.0, "1/1000"): ((5, 20, 21), (118, 99, 82, 67, 58, 56), (56, 46, 36, 27, 21, 20)),
    (3.0, "1/3"): ((2, 3, 4), (13, 11, 10, 10, 17, 10), (5, 4, 3, 4, 7, 3)),
    (3.0, "1/10"): ((2, 4, 5), (23, 20, 18, 18, 18, 18), (9, 7, 7, 7, 7, 7)),
    (3.0, "1/1000"): ((2, 18, 18), (61, 51, 48, 48, 48, 48), (25, 19, 18, 18, 18, 18)),
}
PRINTED_ASTERISKS: Dict[Tuple[float, str], Tuple[int, ...]] = {(3.0, "1/3"): (3, 4)}

# Rows K^s, pair B at K^s, h_zeta1 and h_zeta2 at K^s; columns in TABLE_GRID order.
PRINTED_TABLE_3: Dict[str, Tuple[int, ...]] = {
    "K^s": (8, 11, 22, 5, 8, 19, 2, 3, 17),
    "F(K^s, a, beta)": (9, 12, 23, 7, 9, 20, 3, 7, 18),
    "F(K^s, h_zeta1, 4/9)": (8, 14, 36, 5, 11, 33, 4, 8, 31),
    "F(K^s, h_zeta2, 4/9)": (8, 14, 36, 9, 11, 33, 12, 12, 31),
}

_SHIFTED_ROW = "the printed row holds the values for k = 1..5"
PRINTED_NOTES: Dict[Tuple[int, float, str, str], str] = {
    **{(2, 30.0, "1/10", f"A{k}"): _SHIFTED_ROW for k in range(FORMULA_COLUMNS)},
    (2, 30.0, "1/1000", "A3"): "the printed value does not follow from pair A",
    (2, 3.0, "1/10", "n_upper"): "the index formula and the K^s of Table 1 both give 6",
    (2, 3.0, "1/10", "n_0"): "the printed floors of the row follow n_0 = 7",
    (3, 3.0, "1/10", "K^s"): "Table 1 prints K^s = 5 for the same parameters",
}

TABLE_2_NOTES = [
    "n_0 is the last index with phi_n(mu) >= 0; the least index with phi_n(mu) < 0 is n_0 + 1",
    "the printed header of pair B reads a = p^2/3; the printed values follow a = 2p^2/3",
]


def _compare(value: Any, printed: Any, key: Tuple[int, float, str, str],
             raw: Optional[float] = None, tolerance: float = 0.0) -> TableCell:
    cell = TableCell(value, printed)
    if isinstance(value, float):
        same = abs(round(value, 2) - printed) <= tolerance
    else:
        same = value == printed
    if same:
        return cell
    if (raw is not None and isinstance(value, int) and printed == value - 1
            and abs(raw - value) <= 1e-9 * max(1.0, abs(raw))):
        cell.status = CellStatus.FLOAT_FLOOR
        cell.note = f"F = {value} exactly, printed as floor of {raw!r}"
    elif key in PRINTED_NOTES:
        cell.status = CellStatus.NOTED
        cell.note = PRINTED_NOTES[key]
    else:
        cell.status = CellStatus.MISMATCH
        logger.warning(f"Table {key[0]}, p={key[1]:g} mu={key[2]} [{key[3]}]: computed {value}, printed {printed}")
    return cell


def _map_rows(build: Callable[[float, str], Any], settings: SolverSettings) -> List[Any]:
    with ThreadPoolExecutor(max_workers=max(1, settings.thread_count)) as executor:
        return list(executor.map(lambda item: build(*item), TABLE_GRID))


def _nu_row(p: float, mu: str, numeric: bool, settings: SolverSettings) -> Tuple[List[float], int, float]:
    params = ExampleParams.from_text(p, mu)
    forms = closed_forms(params)
    h, beta = linear_pair_envelope(forms, ArtifactChoice.PAIR_B)
    if not numeric:
        seq = forms.sequence()
        pair = verify_pair(seq, h, beta, max(forms.n_zero, TABLE_COLUMNS))
        return forms.values(TABLE_COLUMNS - 1), greatest_maximizer(seq, pair), forms.plateau

    seq = nu_oracle(worked_example_system(params), settings.grid, settings.refine_rounds, settings)
    pair = verify_pair(seq, h, beta, max(forms.n_zero, TABLE_COLUMNS), settings.tolerance)
    result = solve_stop(pair.sequence, pair, settings.tolerance, NUMERIC_ARGMAX_TOLERANCE)
    return [seq.eval(k) for k in range(TABLE_COLUMNS)], result.argmax[-1], result.max_value


def _table_1(numeric: bool, settings: SolverSettings) -> Table:
    header = ["p", "mu"] + [f"nu_{k}" for k in range(TABLE_COLUMNS)] + ["K^s : nu_opt"]
    source = "static solves" if numeric else "closed forms"
    table = Table(1, f"nu_k for the worked example ({source})", header)
    results = _map_rows(lambda p, mu: _nu_row(p, mu, numeric, settings), settings)
    for (p, mu), (values, K_s, nu_opt) in zip(TABLE_GRID, results):
        printed_nu, printed_tail = PRINTED_TABLE_1[(p, mu)]
        cells = [_compare(v, printed, (1, p, mu, f"nu_{k}"), tolerance=0.005 + 1e-9)
                 for k, (v, printed) in enumerate(zip(values, printed_nu))]
        cells.append(_compare(f"{K_s} : {round(nu_opt, 2):g}", printed_tail, (1, p, mu, "K^s : nu_opt")))
        table.rows.append(TableRow([f"{p:g}", mu], cells))
    return table


def _decreased(values: Sequence[float], k: int) -> bool:
    return k > 0 and values[k] < max(values[:k]) - ARGMAX_TOLERANCE


def _formula_cells(seq: BoundedSequence, pair: UsefulPair, ks: Sequence[int], prefix: str,
                   printed: Sequence[int], p: float, mu: str, values: Sequence[float]) -> List[TableCell]:
    cells = []
    names = [f"{prefix}{k}" for k in ks[:-1]] + [f"{prefix} K^s"]
    stars = PRINTED_ASTERISKS.get((p, mu), ())
    for i, (k, name) in enumerate(zip(ks, names)):
        report = formula_F(seq, k, pair)
        cell = _compare(report.floor_F, printed[i], (2, p, mu, name), raw=report.F_value)
        if i < len(ks) - 1:
            cell.flagged = _decreased(values, k)
            if cell.flagged != (k in stars):
                cell.status = CellStatus.MISMATCH
                cell.note = "asterisk differs from the print"
        cells.append(cell)
    return cells


def _table_2_row(p: float, mu: str) -> TableRow:
    params = ExampleParams.from_text(p, mu)
    forms = closed_forms(params)
    seq = forms.sequence()
    printed_idx, printed_a, printed_b = PRINTED_TABLE_2[(p, mu)]
    indices = (forms.n_lower, forms.n_upper, forms.n_zero_last)
    cells = [_compare(v, printed, (2, p, mu, name))
             for v, printed, name in zip(indices, printed_idx, ("n_lower", "n_upper", "n_0"))]

    pair_b = canonical_artifacts(params, ArtifactChoice.PAIR_B)
    K_s = greatest_maximizer(seq, pair_b)
    ks = list(range(FORMULA_COLUMNS)) + [K_s]
    values = forms.values(FORMULA_COLUMNS)
    for choice, prefix, printed in ((ArtifactChoice.PAIR_A, "A", printed_a),
                                    (ArtifactChoice.PAIR_B, "B", printed_b)):
        pair = canonical_artifacts(params, choice)
        cells.extend(_formula_cells(seq, pair, ks, prefix, printed, p, mu, values))
    return TableRow([f"{p:g}", mu], cells)


def _table_2(settings: SolverSettings) -> Table:
    header = (["p", "mu", "n_lower", "n_upper", "n_0"]
              + [f"A{k}" for k in range(FORMULA_COLUMNS)] + ["A K^s"]
              + [f"B{k}" for k in range(FORMULA_COLUMNS)] + ["B K^s"])
    title = ("floor F(k, a*x, beta); pair A: a = p^2, beta = (2/3)^(1/n_0); "
             "pair B: a = 2p^2/3, beta = (1/2)^(1/n_0)")
    table = Table(2, title, header, notes=list(TABLE_2_NOTES))
    table.rows.extend(_map_rows(_table_2_row, settings))
    return table


def zeta_stopping_index(forms: ClosedForms, zeta: float, k: int) -> int:
    """floor F(k) for (h_zeta, 4/9), evaluated on nu - p^2/3.

    Centering keeps min(zeta, epsilon) exact when it is far below the
    resolution of p^2/3.
    """
    c = min(zeta, forms.epsilon)
    seq = forms.gap_sequence()
    pair = verify_pair(seq, MonotoneBijection.affine(1.0, -c), LYAPUNOV_RATIO, ARTIFACT_HORIZON, tolerance=0.0)
    return formula_F(seq, k, pair, tolerance=0.0).floor_F


def _table_3_column(p: float, mu: str) -> Tuple[int, int, float, int, int]:
    params = ExampleParams.from_text(p, mu)
    forms = closed_forms(params)
    seq = forms.sequence()
    pair_b = canonical_artifacts(params, ArtifactChoice.PAIR_B)
    K_s = greatest_maximizer(seq, pair_b)
    report = formula_F(seq, K_s, pair_b)
    return (K_s, report.floor_F, report.F_value,
            zeta_stopping_index(forms, forms.zeta(2.0), K_s),
            zeta_stopping_index(forms, forms.zeta(1000.0), K_s))


def _table_3(settings: SolverSettings) -> Table:
    header = ["quantity"] + [f"{p:g},{mu}" for p, mu in TABLE_GRID]
    table = Table(3, "floor F at K^s: direct pair B against (h_zeta, 4/9)", header)
    columns = _map_rows(_table_3_column, settings)
    names = list(PRINTED_TABLE_3)
    for r, name in enumerate(names):
        cells = []
        for i, ((p, mu), column) in enumerate(zip(TABLE_GRID, columns)):
            value = column[r] if r < 2 else column[r + 1]
            raw = column[2] if r == 1 else None
            cells.append(_compare(value, PRINTED_TABLE_3[name][i], (3, p, mu, name), raw=raw))
        table.rows.append(TableRow([name], cells))
    return table


def reproduce_tables(which: int, numeric: bool = False,
                     settings: Optional[SolverSettings] = None) -> Table:
    """Recompute table 1, 2 or 3 and compare it with the printed values."""
    settings = settings or SolverSettings()
    if which == 1:
        table = _table_1(numeric, settings)
    elif which == 2:
        table = _table_2(settings)
    elif which == 3:
        table = _table_3(settings)
    else:
        raise ParameterError(f"There is no table {which}")
    found = table.discrepancies()
    logger.info(f"Table {which} reproduced: {len(found)} discrepancies, "
                f"{len(table.unexplained())} unexplained")
    return table
