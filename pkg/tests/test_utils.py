"""Tests for configuration loading, result files and interval helpers."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from src.utils.config_loader import get_default_config, load_config, merge_config
from src.utils.file_manager import FileManager
from src.utils.intervals import (
    intersection_length,
    merge_intervals,
    symmetric_difference_length,
    total_length,
)

REPO_CONFIG = Path(__file__).resolve().parents[1] / "config" / "config.yaml"


class TestConfigLoader:
    def test_repository_config(self):
        config = load_config(str(REPO_CONFIG))
        assert config["oracle"]["rng_seed"] == 0xC0FFEE
        assert config["map"]["r"] == pytest.approx(3.83187405528331556841)
        assert config["orbit"]["recurrence_tol"] == 1e-8
        assert config["capture"]["refine_crossings"] is True

    def test_missing_file_gives_defaults(self, tmp_path):
        assert load_config(str(tmp_path / "absent.yaml")) == get_default_config()

    def test_partial_file_is_merged(self, tmp_path):
        path = tmp_path / "partial.yaml"
        path.write_text("extrema:\n  tol_root: 1.0e-10\n")
        config = load_config(str(path))
        assert config["extrema"]["tol_root"] == 1e-10
        assert config["extrema"]["max_q"] == 20
        assert config["oracle"]["n_samples"] == 1_000_000

    def test_broken_file_gives_defaults(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("map: [unclosed\n")
        assert load_config(str(path)) == get_default_config()

    def test_merge_does_not_mutate(self):
        base = {"a": {"b": 1, "c": 2}}
        merged = merge_config(base, {"a": {"b": 5}})
        assert merged == {"a": {"b": 5, "c": 2}}
        assert base == {"a": {"b": 1, "c": 2}}


class TestFileManager:
    @pytest.fixture
    def manager(self, tmp_path):
        return FileManager({"output": {"directory": str(tmp_path / "out"), "format": "json"}})

    def test_creates_output_directory(self, manager):
        assert manager.output_dir.is_dir()

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            FileManager({"output": {"directory": str(tmp_path), "format": "xml"}})

    def test_json_converts_numpy(self, manager):
        path = manager.resolve_path("data.json")
        manager.save_json({"x": np.float64(0.1), "v": np.arange(3)}, path)
        assert json.loads(path.read_text()) == {"x": 0.1, "v": [0, 1, 2]}

    def test_csv_writes_round_trip_floats(self, manager):
        path = manager.resolve_path("rows.csv")
        manager.save_csv([{"q": 1, "P": 0.1 + 0.2, "missing": None}], path)
        lines = path.read_text().splitlines()
        assert lines == ["q,P,missing", "1,0.30000000000000004,"]

    def test_save_follows_format(self, manager):
        path = manager.resolve_path("table.csv")
        manager.save({"rows": []}, [{"a": 1}], path, fmt="csv")
        assert path.read_text() == "a\n1\n"

    def test_sibling(self):
        assert FileManager.sibling(Path("x/extrema.csv"), "segments") == Path("x/extrema_segments.csv")

    def test_explicit_path(self, manager, tmp_path):
        path = manager.resolve_path("ignored.json", tmp_path / "nested" / "file.json")
        assert path == tmp_path / "nested" / "file.json"
        assert path.parent.is_dir()


class TestIntervals:
    def test_merge_overlapping_and_touching(self):
        assert merge_intervals([(0.5, 0.7), (0.0, 0.2), (0.1, 0.3), (0.3, 0.4)]) == [(0.0, 0.4), (0.5, 0.7)]

    def test_merge_drops_empty(self):
        assert merge_intervals([(0.2, 0.2), (0.4, 0.3)]) == []

    def test_merge_closes_small_gaps(self):
        assert merge_intervals([(0.0, 0.1), (0.1 + 1e-13, 0.2)], tol=1e-12) == [(0.0, 0.2)]

    def test_total_length(self):
        assert total_length([(0.0, 0.1), (0.5, 0.75)]) == pytest.approx(0.35)

    def test_intersection_and_symmetric_difference(self):
        first = [(0.0, 0.4), (0.6, 1.0)]
        second = [(0.2, 0.8)]
        assert intersection_length(first, second) == pytest.approx(0.4)
        assert symmetric_difference_length(first, second) == pytest.approx(0.6)
        assert symmetric_difference_length(first, first) == pytest.approx(0.0)
