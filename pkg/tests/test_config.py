import pytest

from gmflnet.config import (ConfigError, RunConfig, dump_config, load_config, parse_config,
                            save_config)
from gmflnet.gbfl import FUSIONS, REGULARIZATIONS
from gmflnet.head import HEAD_POOLINGS
from gmflnet.mia import GEOMETRY_MODES


def test_defaults_round_trip(tmp_path):
    cfg = RunConfig()
    assert parse_config(dump_config(cfg)) == cfg
    path = tmp_path / "run.ini"
    save_config(path, cfg)
    assert load_config(path) == cfg


def test_edited_values_round_trip():
    cfg = parse_config("""
[model]
actions = a, b
head_widths = 32, 16, 8
head_pooling = avg+avg
[mia]
k = 3
M = 16
geometry = angle
[gbfl]
r = 2
fusion = harmonic_mean
regularization = product
pooling = max
[loss]
margin = 0.3
alpha = 0.5
[train]
max_epochs = 7
auto_lr = yes
[trigger]
threshold_mode = fixed
per_action = a:0.6:0.4, b:0.5:0.5
[synth]
actions = a, b
cycles_range = 2, 4
""")
    assert cfg.model.actions == ("a", "b") and cfg.model.head_widths == (32, 16, 8)
    assert cfg.model.mia.k == 3 and cfg.model.mia.geometry == "angle"
    assert cfg.model.gbfl.fusion == "harmonic_mean" and cfg.model.gbfl.pooling == "max"
    assert cfg.loss.margin == 0.3 and cfg.train.auto_lr is True and cfg.train.max_epochs == 7
    assert cfg.trigger.per_action == {"a": (0.6, 0.4), "b": (0.5, 0.5)}
    assert cfg.synth.cycles_range == (2, 4)
    assert parse_config(dump_config(cfg)) == cfg


@pytest.mark.parametrize("text", [
    "[model]\nseeed = 1\n",
    "[optimizer]\nlr = 1\n",
    "[gbfl]\nfusion = median\n",
    "[train]\nauto_lr = maybe\n",
    "[mia]\nk = two\n",
    "[trigger]\nper_action = a:0.5\n",
    "no section header\n",
])
def test_bad_configs_are_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.ini")


def test_every_ablation_is_reachable():
    for geometry in GEOMETRY_MODES:
        assert parse_config(f"[mia]\ngeometry = {geometry}\n").model.mia.geometry == geometry
    for pooling in ("avg", "max"):
        for reg in REGULARIZATIONS:
            g = parse_config(f"[gbfl]\npooling = {pooling}\nregularization = {reg}\n").model.gbfl
            assert (g.pooling, g.regularization) == (pooling, reg)
    for fusion in FUSIONS:
        assert parse_config(f"[gbfl]\nfusion = {fusion}\n").model.gbfl.fusion == fusion
    for hp in HEAD_POOLINGS:
        assert parse_config(f"[model]\nhead_pooling = {hp}\n").model.head_pooling == hp


def test_shipped_configs_parse():
    from pathlib import Path
    root = Path(__file__).resolve().parents[1] / "configs"
    assert load_config(root / "default.ini") == RunConfig()
    toy = load_config(root / "toy.ini")
    assert toy.model.skeleton == "toy4" and toy.model.outputs == 4
