import logging

import pytest

from msjstab import config
from msjstab.errors import ParameterError


def test_packaged_catalogue():
    systems = config.load_systems()
    assert {"3-10-30", "tiny", "mix-1-100-200", "ratio-1-67-201"} <= set(systems)
    assert config.system_params("3-10-30") == {"n1": 3, "n2": 10, "n": 30, "mu1": 2.0, "mu2": 1.0, "p1": 0.5}
    assert "p1" not in config.system_params("mix-1-100-200")


def test_unknown_system():
    with pytest.raises(ParameterError, match="unknown system"):
        config.system_params("nope")


def test_custom_catalogue(tmp_path):
    path = tmp_path / "systems.toml"
    path.write_text('[systems.mine]\nn1 = 2\nn2 = 5\nn = 11\nmu1 = 1.0\nmu2 = 0.5\np1 = 0.3\n')
    assert config.system_params("mine", path)["n"] == 11


def test_run_config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('system = "tiny"\n[sim]\nhorizon = 500.0\n[grid]\np2 = "0:1:lin:5"\n')
    run = config.load_run_config(path)
    assert run["system"] == "tiny"
    assert run["sim"]["horizon"] == 500.0
    path.write_text("[plot]\ncolor = 'red'\n")
    with pytest.raises(ParameterError, match="plot"):
        config.load_run_config(path)


def test_malformed_run_config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[params\nn1 = 1\n")
    with pytest.raises(ParameterError, match="malformed TOML"):
        config.load_run_config(path)


def test_default_threads(monkeypatch):
    monkeypatch.delenv(config.THREADS_ENV, raising=False)
    assert config.default_threads() == 1
    monkeypatch.setenv(config.THREADS_ENV, "8")
    assert config.default_threads() == 8
    monkeypatch.setenv(config.THREADS_ENV, "0")
    assert config.default_threads() == 1
    monkeypatch.setenv(config.THREADS_ENV, "many")
    with pytest.raises(ParameterError):
        config.default_threads()


def test_default_log_level(monkeypatch):
    monkeypatch.delenv(config.LOG_LEVEL_ENV, raising=False)
    assert config.default_log_level() == logging.WARNING
    monkeypatch.setenv(config.LOG_LEVEL_ENV, "debug")
    assert config.default_log_level() == logging.DEBUG
    monkeypatch.setenv(config.LOG_LEVEL_ENV, "chatty")
    assert config.default_log_level() == logging.WARNING


def test_parallel_map_keeps_order():
    assert config.parallel_map(lambda x: x * x, range(10), workers=4) == [x * x for x in range(10)]
    assert config.parallel_map(str, [3], workers=4) == ["3"]
