"""
Tests for configuration, record files and radial tables.
"""
import math

import numpy as np
import pytest

from src.geometry.errors import AdmissionError
from src.geometry.metric import RadialMetric
from src.schemas.models import DeltaThreshold, HarmonicRecord
from src.utils.config_utils import (
    OUTPUT_DIR_ENV,
    activate_config,
    ensure_directories,
    get_setting,
    load_config,
    resolve_output_dir,
)
from src.utils.io_utils import (
    load_radial_metric,
    load_radial_solution,
    load_record,
    read_csv,
    save_radial_metric,
    save_radial_solution,
    save_record,
    write_csv,
)
from src.utils.parallel_utils import parallel_map


def test_default_config():
    """Test the shipped defaults."""
    config = load_config()
    assert config["SPHERE_ORDER"] == 24
    assert get_setting("SIGMA") == -0.5
    with pytest.raises(KeyError):
        get_setting("NOT_A_SETTING")


def test_custom_config(tmp_path, monkeypatch):
    """Test that an explicit config file replaces the defaults."""
    path = tmp_path / "config.yaml"
    path.write_text("OUTPUT_DIR: custom\nSEED: 3\n")
    try:
        config = load_config(str(path))
        assert get_setting("SEED", config) == 3
        assert config["SPHERE_ORDER"] == 24
        monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
        assert resolve_output_dir(config) == "custom"
    finally:
        activate_config(None)


def _tolerance(_):
    return get_setting("HARMONIC_FIT_TOLERANCE")


def test_config_file_reaches_settings(tmp_path):
    """Test a loaded file drives get_setting here and in worker processes."""
    path = tmp_path / "config.yaml"
    path.write_text("HARMONIC_FIT_TOLERANCE: 1.0e-3\n")
    default = get_setting("HARMONIC_FIT_TOLERANCE")
    try:
        load_config(str(path))
        assert get_setting("HARMONIC_FIT_TOLERANCE") == 1e-3
        assert load_config()["HARMONIC_FIT_TOLERANCE"] == 1e-3
        assert get_setting("SIGMA") == -0.5
        assert parallel_map(_tolerance, range(3), workers=2) == [1e-3] * 3
    finally:
        activate_config(None)
    assert get_setting("HARMONIC_FIT_TOLERANCE") == default


def test_output_dir_precedence(tmp_path, monkeypatch):
    """Test --out, then the environment, then the config value."""
    config = {"OUTPUT_DIR": str(tmp_path / "from_config")}
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "from_env"))
    assert resolve_output_dir(config, str(tmp_path / "flag")) == str(tmp_path / "flag")
    assert resolve_output_dir(config) == str(tmp_path / "from_env")
    monkeypatch.delenv(OUTPUT_DIR_ENV)
    created = ensure_directories(config)
    assert created == str(tmp_path / "from_config")
    assert (tmp_path / "from_config").is_dir()


def test_record_file(tmp_path):
    """Test JSON records load back into their model."""
    record = HarmonicRecord(n=3, R=1.0, monopole=0.25, higher=[{"l": 1, "idx": 0, "c": 0.01}])
    path = save_record(record, str(tmp_path / "U.json"))
    assert load_record(HarmonicRecord, path) == record


def test_csv_cells(tmp_path):
    """Test float cells keep full precision and None becomes empty."""
    path = write_csv([{"a": 0.1 + 0.2, "b": None}, {"a": 1.0, "c": "x"}], str(tmp_path / "t.csv"))
    rows = read_csv(path)
    assert list(rows[0]) == ["a", "b", "c"]
    assert float(rows[0]["a"]) == 0.1 + 0.2
    assert rows[0]["b"] == ""
    assert rows[1]["c"] == "x"
    write_csv([DeltaThreshold(epsilon=0.1).model_dump()], str(tmp_path / "d.csv"), columns=["epsilon"])
    assert read_csv(str(tmp_path / "d.csv")) == [{"epsilon": "0.1"}]


def test_radial_table_is_exact(tmp_path):
    """Test that a saved metric table reloads bit for bit."""
    g = RadialMetric.schwarzschild_isotropic(3, 0.3, points_per_decade=16)
    loaded = load_radial_metric(save_radial_metric(g, str(tmp_path / "g.txt")))
    assert np.array_equal(loaded.r, g.r) and np.array_equal(loaded.B, g.B)
    assert loaded.header() == g.header()
    header, r, u = load_radial_solution(save_radial_solution(g.r, g.A, str(tmp_path / "u.txt"), label="A"))
    assert header == {"label": "A"}
    assert np.array_equal(u, g.A)


@pytest.mark.parametrize("text,invariant", [
    ("1.0 1.0 1.0\n", "table_header"),
    ('# {"n": 3, "p": 1.0}\n1.0 1.0\n', "table_shape"),
    ('# {"n": 3, "p": 1.0}\n1.0 one 1.0\n', "table_values"),
    ('# {"n": 2, "p": 1.0}\n1.0 1.0 1.0\n', "table_header"),
])
def test_malformed_tables(tmp_path, text, invariant):
    """Test AdmissionError naming the broken part of a table."""
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(AdmissionError) as info:
        load_radial_metric(str(path))
    assert info.value.invariant == invariant


@pytest.mark.parametrize("workers", [1, 2])
def test_parallel_map_keeps_order(workers):
    """Test results come back in input order."""
    assert parallel_map(math.sqrt, [16.0, 1.0, 9.0, 4.0], workers=workers) == [4.0, 1.0, 3.0, 2.0]
