import pytest
from omegaconf import DictConfig
from omegaconf.errors import ConfigKeyError, ValidationError

from diskchain.configs import LabelConfig, PostprocParams, SynthParams
from diskchain.utils import load_settings, pool_map, validate_config


def test_pool_map():
    items = [str(bin(k))[2:] for k in range(40)]
    assert pool_map(int, items, base=2) == list(range(40))
    assert pool_map(int, items, processes=3, base=2) == list(range(40))
    assert pool_map(abs, [], processes=3) == []


def test_load_settings(tmp_path):
    settings = load_settings()
    assert settings["labels"] == LabelConfig()
    assert settings["postproc"] == PostprocParams()
    assert settings["eval"].iou == 0.5

    path = tmp_path / "override.yaml"
    path.write_text("synth:\n  seed: 9\n  image_size: [64, 96]\npostproc:\n  t_tcl: 0.5\n")
    settings = load_settings(path)
    assert isinstance(settings["synth"], SynthParams)
    assert settings["synth"].seed == 9
    assert list(settings["synth"].image_size) == [64, 96]
    assert settings["postproc"].t_tcl == 0.5
    assert settings["labels"] == LabelConfig()

    path.write_text("labels:\n  n_samples: many\n")
    with pytest.raises(ValidationError):
        load_settings(path)
    path.write_text("synth:\n  colour: red\n")
    with pytest.raises(ConfigKeyError):
        load_settings(path)


def test_validate_config(tmp_path):
    assert validate_config(LabelConfig()) == LabelConfig()
    assert isinstance(validate_config({"t_tr": 0.3}), DictConfig)
    path = tmp_path / "c.yaml"
    path.write_text("t_tr: 0.3\n")
    assert validate_config(str(path)) == {"t_tr": 0.3}
