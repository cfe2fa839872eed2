"""
Tests for the command-line entry point.
"""
import json

import pytest

from src.experiments.cli import build_parser, main
from src.experiments.families import bump
from src.geometry.metric import RadialMetric
from src.schemas.models import FamilyKind, FamilySpec, GridSpec, MassReportRecord
from src.utils.config_utils import activate_config
from src.utils.io_utils import load_radial_solution, load_record, read_csv, save_radial_metric


@pytest.fixture
def schwarzschild_table(tmp_path):
    g = RadialMetric.schwarzschild_isotropic(3, 0.2, points_per_decade=64)
    return save_radial_metric(g, str(tmp_path / "schw.txt"))


@pytest.fixture
def quick_scenario(tmp_path):
    path = tmp_path / "quick.yaml"
    path.write_text(
        "name: quick\n"
        "family:\n"
        "  kind: schwarzschild\n"
        "  masses: [0.1, 0.01]\n"
        "sweep:\n"
        "  run_flow: false\n"
    )
    return str(path)


def test_parser_requires_command():
    """Test that a subcommand is mandatory."""
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_mass_command(schwarzschild_table, tmp_path):
    """Test mass writes the report record and csv."""
    out = tmp_path / "out"
    assert main(["mass", schwarzschild_table, "--out", str(out)]) == 0
    record = load_record(MassReportRecord, str(out / "schw_mass.json"))
    assert record.extrapolated_mass == pytest.approx(0.2, rel=1e-4)
    assert read_csv(str(out / "schw_mass.csv"))[0]["fit_method"] == record.fit_method


def test_flatten_command(tmp_path):
    """Test flatten on a bump table writes w with w <= 1."""
    member = bump(3, 0.1, FamilySpec(kind=FamilyKind.BUMP), GridSpec(points_per_decade=64))
    table = save_radial_metric(member.metric, str(tmp_path / "bump.txt"))
    out = tmp_path / "out"
    assert main(["flatten", table, "--out", str(out)]) == 0
    with open(out / "bump_flatten.json") as handle:
        record = json.load(handle)
    assert record["v_min"] >= 1.0 - 1e-12
    header, _, w = load_radial_solution(str(out / "bump_w.txt"))
    assert header["quantity"] == "w"
    assert w.max() <= 1.0 + 1e-12


def test_config_flag_sets_tolerances(tmp_path):
    """Test --config reaches the flattening tolerance."""
    member = bump(3, 0.1, FamilySpec(kind=FamilyKind.BUMP), GridSpec(points_per_decade=64))
    table = save_radial_metric(member.metric, str(tmp_path / "bump.txt"))
    strict = tmp_path / "strict.yaml"
    strict.write_text("FLATTENED_FACTOR_TOLERANCE: 1.0e-30\n")
    try:
        assert main(["flatten", table, "--out", str(tmp_path / "strict"), "--config", str(strict)]) == 2
        assert not (tmp_path / "strict" / "bump_flatten.json").exists()
    finally:
        activate_config(None)
    assert main(["flatten", table, "--out", str(tmp_path / "default")]) == 0


def test_sweep_command(quick_scenario, tmp_path, capsys):
    """Test sweep with overrides prints the rows and writes the table."""
    out = tmp_path / "out"
    assert main(["sweep", quick_scenario, "--out", str(out), "--grid-points", "64", "--a", "6"]) == 0
    printed = capsys.readouterr().out
    assert "schwarzschild_m0.01" in printed
    rows = read_csv(str(out / "quick" / "sweep.csv"))
    assert [row["a"] for row in rows] == ["6.0", "6.0"]


def test_invalid_inputs_exit_2(tmp_path, quick_scenario):
    """Test exit status 2 for a corrupt table and an out-of-range override."""
    bad = tmp_path / "bad.txt"
    bad.write_text("no header\n")
    assert main(["mass", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["sweep", quick_scenario, "--a", "2", "--out", str(tmp_path)]) == 2
    assert main(["mass", str(tmp_path / "missing.txt"), "--out", str(tmp_path)]) == 2


@pytest.mark.slow
def test_check_command(tmp_path):
    """Test the full invariant suite passes and writes checks.csv."""
    assert main(["check", "--out", str(tmp_path)]) == 0
    rows = read_csv(str(tmp_path / "checks.csv"))
    assert rows and all(row["passed"] == "true" for row in rows)
