import pytest

from nandkit.config import Config, ConfigError, load_config


def write_cfg(tmp_path, text):
    p = tmp_path / "nand.cfg"
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadConfig:
    def test_defaults(self):
        cfg = load_config(None, env={})
        assert cfg.detector == "zs"
        assert cfg.suppression_size == (256, 256)
        assert cfg.coreset_fraction == 0.1

    def test_parse_file(self, tmp_path):
        p = write_cfg(
            tmp_path,
            """
            # comment
            dataset_root = /tmp/ds
            detector = bank
            coreset_fraction = 0.5
            suppression_size = 128x128
            stub_layout = 4x4x32,2x2x32
            layers = 0,1
            phrase_generator.url = http://localhost:9999/phrases
            """,
        )
        cfg = load_config(p, env={})
        assert str(cfg.dataset_root) == "/tmp/ds"
        assert cfg.detector == "bank"
        assert cfg.coreset_fraction == 0.5
        assert cfg.suppression_size == (128, 128)
        assert cfg.stub_layout == ((4, 4, 32), (2, 2, 32))
        assert cfg.layers == (0, 1)
        assert cfg.phrase_generator_url == "http://localhost:9999/phrases"

    def test_env_overrides_file(self, tmp_path):
        p = write_cfg(tmp_path, "detector = zs\nservice_port = 1234\n")
        cfg = load_config(
            p,
            env={
                "NAND_DETECTOR": "bank",
                "NAND_PHRASE_GENERATOR_URL": "http://x/y",
                "NAND_SERVICE_PORT": "4321",
            },
        )
        assert cfg.detector == "bank"
        assert cfg.service_port == 4321
        assert cfg.phrase_generator_url == "http://x/y"

    def test_unknown_key(self, tmp_path):
        p = write_cfg(tmp_path, "no_such_key = 1\n")
        with pytest.raises(ConfigError, match="unknown config key"):
            load_config(p, env={})

    def test_fraction_range_validated(self, tmp_path):
        p = write_cfg(tmp_path, "coreset_fraction = 0\n")
        with pytest.raises(ConfigError, match="coreset_fraction"):
            load_config(p, env={})

    def test_sigma_validated(self, tmp_path):
        p = write_cfg(tmp_path, "smoothing_sigma = -1\n")
        with pytest.raises(ConfigError, match="smoothing_sigma"):
            load_config(p, env={})

    def test_referenced_path_must_exist(self, tmp_path):
        p = write_cfg(tmp_path, f"templates_path = {tmp_path}/missing.txt\n")
        with pytest.raises(ConfigError, match="templates_path"):
            load_config(p, env={})

    def test_bad_size(self, tmp_path):
        p = write_cfg(tmp_path, "suppression_size = alpha\n")
        with pytest.raises(ConfigError, match="size"):
            load_config(p, env={})

    def test_malformed_line(self, tmp_path):
        p = write_cfg(tmp_path, "just some words\n")
        with pytest.raises(ConfigError, match="key = value"):
            load_config(p, env={})

    def test_empty_layers_means_all(self, tmp_path):
        p = write_cfg(tmp_path, "layers =\n")
        assert load_config(p, env={}).layers is None
