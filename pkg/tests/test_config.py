"""Configuration file parsing and environment-backed secrets."""

import pytest

from sym.config import ADMIN_TOKEN_ENV, ServiceConfig, admin_token, load_config
from sym.errors import ValidationError


class TestDefaults:
    def test_no_file_means_all_defaults(self):
        cfg = load_config(None)
        assert cfg == ServiceConfig()
        assert cfg.listen_addr == "127.0.0.1:8000"
        assert cfg.data_dir == "./sym-data"
        assert cfg.update_interval_hours == 24.0
        assert cfg.default_k == 3

    def test_derived_properties(self):
        cfg = ServiceConfig(listen_addr="0.0.0.0:9000", update_interval_hours=1.5)
        assert (cfg.host, cfg.port) == ("0.0.0.0", 9000)
        assert cfg.update_interval.total_seconds() == 5400
        assert cfg.update_params.alpha == 0.2
        assert cfg.update_params.min_samples == 5


class TestFileLoading:
    def test_full_file_round_trips(self, tmp_path):
        path = tmp_path / "sym.toml"
        path.write_text(
            'listen_addr = "localhost:9999"\n'
            'data_dir = "/tmp/sym"\n'
            "update_interval_hours = 6.0\n"
            "default_k = 5\n"
            "alpha = 0.5\n"
            "min_samples = 2\n"
        )
        cfg = load_config(path)
        assert cfg.port == 9999
        assert cfg.data_dir == "/tmp/sym"
        assert cfg.update_interval_hours == 6.0
        assert cfg.default_k == 5
        assert cfg.update_params.alpha == 0.5
        assert cfg.update_params.min_samples == 2

    def test_partial_file_keeps_other_defaults(self, tmp_path):
        path = tmp_path / "sym.toml"
        path.write_text("default_k = 7\n")
        cfg = load_config(path)
        assert cfg.default_k == 7
        assert cfg.listen_addr == "127.0.0.1:8000"

    def test_unknown_keys_are_named_in_the_error(self, tmp_path):
        path = tmp_path / "sym.toml"
        path.write_text("default_kay = 7\n")
        with pytest.raises(ValidationError) as err:
            load_config(path)
        assert "default_kay" in err.value.message


class TestValidation:
    def test_bad_listen_addr(self):
        with pytest.raises(ValidationError):
            ServiceConfig(listen_addr="no-port-here")
        with pytest.raises(ValidationError):
            ServiceConfig(listen_addr="host:not-a-number")

    def test_bad_interval(self):
        with pytest.raises(ValidationError):
            ServiceConfig(update_interval_hours=0)

    def test_bad_k(self):
        with pytest.raises(ValidationError):
            ServiceConfig(default_k=0)

    def test_bad_update_params(self):
        with pytest.raises(ValidationError):
            ServiceConfig(alpha=0.0)
        with pytest.raises(ValidationError):
            ServiceConfig(alpha=1.5)
        with pytest.raises(ValidationError):
            ServiceConfig(min_samples=0)


class TestAdminToken:
    def test_unset_means_open(self, monkeypatch):
        monkeypatch.delenv(ADMIN_TOKEN_ENV, raising=False)
        assert admin_token() is None

    def test_empty_string_means_open(self, monkeypatch):
        monkeypatch.setenv(ADMIN_TOKEN_ENV, "")
        assert admin_token() is None

    def test_value_is_passed_through(self, monkeypatch):
        monkeypatch.setenv(ADMIN_TOKEN_ENV, "hunter2")
        assert admin_token() == "hunter2"
