"""Tests for the worked example family and the reproduced tables."""

import os

import pytest

from src.core.gallery import (
    LYAPUNOV_RATIO,
    PRINTED_TABLE_2,
    TABLE_GRID,
    ArtifactChoice,
    CellStatus,
    ExampleParams,
    canonical_artifacts,
    closed_forms,
    reproduce_tables,
    worked_example_system,
)
from src.core.sequences import greatest_maximizer
from src.core.settings import SolverSettings
from src.core.systems import solve_static
from src.errors import ParameterError


def _ledger(table):
    return {(" ".join(row.labels), column): cell.status for row, column, cell in table.discrepancies()}


class TestExampleParams:
    def test_fraction_label(self):
        params = ExampleParams.from_text(9, "1/10")
        assert params.mu == pytest.approx(0.1)
        assert params.mu_label == "1/10"
        assert params.label == "p=9, mu=1/10"

    @pytest.mark.parametrize("p, mu", [(1.0, 0.1), (30.0, 0.0), (30.0, 0.5), (30.0, -0.1)])
    def test_out_of_range(self, p, mu):
        with pytest.raises(ParameterError):
            ExampleParams(p, mu)


class TestClosedForms:
    def test_worked_indices(self, worked_forms):
        assert (worked_forms.n_lower, worked_forms.n_upper, worked_forms.n_zero_last) == (8, 9, 10)
        assert worked_forms.K_s == 8
        assert worked_forms.plateau == 300.0

    @pytest.mark.parametrize("p, mu", TABLE_GRID)
    def test_indices_against_print(self, p, mu):
        forms = closed_forms(ExampleParams.from_text(p, mu))
        computed = (forms.n_lower, forms.n_upper, forms.n_zero_last)
        if (p, mu) == (3.0, "1/10"):
            assert computed == (2, 6, 7)
        else:
            assert computed == PRINTED_TABLE_2[(p, mu)][0]

    @pytest.mark.parametrize("p, mu", TABLE_GRID)
    def test_greatest_maximizer_is_last_plateau_index(self, p, mu):
        params = ExampleParams.from_text(p, mu)
        forms = closed_forms(params)
        pair = canonical_artifacts(params, ArtifactChoice.PAIR_B)
        assert greatest_maximizer(forms.sequence(), pair) == forms.K_s == forms.n_upper - 1

    def test_gap_matches_values(self, worked_forms):
        for n in range(30):
            assert worked_forms.nu(n) == pytest.approx(worked_forms.plateau + worked_forms.nu_gap(n),
                                                       rel=1e-12, abs=1e-9)

    def test_static_solves_agree(self):
        params = ExampleParams.from_text(9, "1/10")
        forms = closed_forms(params)
        system = worked_example_system(params)
        for k in range(13):
            result = solve_static(system, k, grid=300, refine_rounds=3)
            assert result.value == pytest.approx(forms.nu(k), rel=1e-6, abs=1e-6)

    def test_n_star(self, worked_forms):
        assert worked_forms.n_star(0.5) == 7
        with pytest.raises(ParameterError):
            worked_forms.n_star(0.0)


class TestCanonicalArtifacts:
    def test_pairs(self, worked_params):
        pair_a = canonical_artifacts(worked_params, ArtifactChoice.PAIR_A)
        pair_b = canonical_artifacts(worked_params, "pairB")
        assert pair_a.h(1.0) == pytest.approx(900.0)
        assert pair_a.beta == pytest.approx((2.0 / 3.0) ** 0.1)
        assert pair_b.h(1.0) == pytest.approx(600.0)
        assert pair_b.beta == pytest.approx(0.5 ** 0.1)
        assert pair_a.useful and pair_b.useful

    def test_h_zeta(self, worked_params, worked_forms):
        pair = canonical_artifacts(worked_params, ArtifactChoice.H_ZETA, worked_forms.zeta(2.0))
        assert pair.beta == LYAPUNOV_RATIO
        assert pair.h.h0 == pytest.approx(300.0 - worked_forms.epsilon)

    def test_zeta_is_required(self, worked_params, worked_forms):
        with pytest.raises(ParameterError):
            canonical_artifacts(worked_params, ArtifactChoice.H_ZETA)
        with pytest.raises(ParameterError):
            canonical_artifacts(worked_params, ArtifactChoice.H_ZETA, worked_forms.margin)

    def test_certificate_default_margin(self, worked_params, worked_forms):
        cert = canonical_artifacts(worked_params, ArtifactChoice.CERTIFICATE)
        assert cert(300.0) == pytest.approx(worked_forms.epsilon)

    def test_unknown_choice(self, worked_params):
        with pytest.raises(ValueError):
            canonical_artifacts(worked_params, "pairC")


class TestTables:
    def test_table_1_golden(self, golden_dir):
        table = reproduce_tables(1)
        with open(os.path.join(golden_dir, "table1.txt"), encoding="utf-8") as f:
            assert table.render_text() == f.read()
        assert table.exit_status == 0

    def test_table_1_static_solves(self):
        settings = SolverSettings(grid=300, refine_rounds=3, thread_count=2)
        numeric = reproduce_tables(1, numeric=True, settings=settings)
        exact = reproduce_tables(1)
        for num_row, exact_row in zip(numeric.rows, exact.rows):
            for num_cell, exact_cell in zip(num_row.cells[:-1], exact_row.cells[:-1]):
                assert num_cell.value == pytest.approx(exact_cell.value, rel=1e-6, abs=1e-6)
            assert num_row.cells[-1].value == exact_row.cells[-1].value

    def test_table_2_ledger(self):
        table = reproduce_tables(2)
        floors = {("30 1/3", "B K^s"), ("30 1/10", "B K^s"), ("30 1/1000", "B K^s"),
                  ("9 1/10", "B K^s"), ("9 1/1000", "B K^s"), ("3 1/3", "B2"), ("3 1/3", "B K^s")}
        noted = {("30 1/10", f"A{k}") for k in range(5)} | {
            ("30 1/1000", "A3"), ("3 1/10", "n_upper"), ("3 1/10", "n_0")}
        expected = {**{key: CellStatus.FLOAT_FLOOR for key in floors},
                    **{key: CellStatus.NOTED for key in noted}}
        assert _ledger(table) == expected
        assert table.exit_status == 0

    def test_table_2_flags(self):
        table = reproduce_tables(2)
        flagged = {(" ".join(row.labels), table.header[len(row.labels) + i])
                   for row in table.rows for i, cell in enumerate(row.cells) if cell.flagged}
        assert flagged == {("3 1/3", "A3"), ("3 1/3", "A4"), ("3 1/3", "B3"), ("3 1/3", "B4")}
        assert "* not computed in practice" in table.render_text()

    def test_table_3_ledger(self):
        table = reproduce_tables(3)
        floors = {("F(K^s, a, beta)", column)
                  for column in ("30,1/3", "30,1/10", "30,1/1000", "9,1/10", "9,1/1000", "3,1/3")}
        expected = {("K^s", "3,1/10"): CellStatus.NOTED, **{key: CellStatus.FLOAT_FLOOR for key in floors}}
        assert _ledger(table) == expected
        assert table.exit_status == 0

    def test_table_3_zeta_rows(self):
        table = reproduce_tables(3)
        rows = {row.labels[0]: [cell.value for cell in row.cells] for row in table.rows}
        assert rows["F(K^s, h_zeta1, 4/9)"] == [8, 14, 36, 5, 11, 33, 4, 8, 31]
        assert rows["F(K^s, h_zeta2, 4/9)"] == [8, 14, 36, 9, 11, 33, 12, 12, 31]
        assert rows["F(K^s, a, beta)"] == [10, 13, 24, 7, 10, 21, 4, 7, 18]

    def test_csv_carries_the_ledger(self):
        text = reproduce_tables(3).render_csv()
        assert text.splitlines()[0].startswith('quantity,"30,1/3"')
        assert "row,column,computed,printed,kind" in text
        assert "floating-point floor" in text

    def test_unknown_table(self):
        with pytest.raises(ParameterError):
            reproduce_tables(4)
