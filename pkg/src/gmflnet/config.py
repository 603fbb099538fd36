"""One INI file carrying every hyperparameter of a run.

Sections and keys mirror the dataclass fields they populate::

    [model]    skeleton, actions, head_widths, head_pooling, seed
    [mia]      k, M, geometry, coord_depth, geo_depth
    [gbfl]     r, fusion, regularization, pooling, final_activation
    [loss]     margin, alpha, triplet_sign
    [train]    batch_size, max_epochs, seed, lr_initial, auto_lr, plateau_patience, ...
    [trigger]  threshold_mode, entry_threshold, exit_threshold, mean_over, fire_rule,
               per_action (``squat:0.6:0.4, lunge:0.5:0.5``)
    [synth]    corpus generator settings (actions, train_per_class, cycles_range, ...)

Sequences are comma separated.  Missing keys keep their defaults; unknown
keys are an error so typos do not silently fall back.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .counting import TriggerConfig
from .gbfl import GbflConfig
from .head import LossConfig
from .mia import MiaConfig
from .model import ModelConfig
from .synth import CorpusConfig
from .training import TrainConfig


class ConfigError(ValueError):
    def __init__(self, path, section: str | None, message: str):
        self.path, self.section, self.message = str(path), section, message
        where = f"{self.path} [{section}]" if section else self.path
        super().__init__(f"{where}: {message}")


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    trigger: TriggerConfig = field(default_factory=TriggerConfig)
    synth: CorpusConfig = field(default_factory=CorpusConfig)


def _parse(text: str, kind):
    text = text.strip()
    origin = typing.get_origin(kind)
    if origin is tuple:
        args = typing.get_args(kind)
        item = args[0]
        parts = [p.strip() for p in text.split(",") if p.strip()]
        return tuple(_parse(p, item) for p in parts)
    if kind is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def _format(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _fill(cls, section: dict | None, path, name: str, **extra):
    if section is None:
        return cls(**extra)
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)} - set(extra)
    unknown = set(section.keys()) - names
    if unknown:
        raise ConfigError(path, name, f"unknown keys {sorted(unknown)}")
    kwargs = dict(extra)
    for key, text in section.items():
        try:
            kwargs[key] = _parse(text, hints[key])
        except ValueError as exc:
            raise ConfigError(path, name, f"{key}: {exc}") from exc
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, name, str(exc)) from exc


def _per_action(text: str) -> dict[str, tuple[float, float]]:
    out = {}
    for item in (p.strip() for p in text.split(",") if p.strip()):
        action, entry, exit_ = item.split(":")
        out[action.strip()] = (float(entry), float(exit_))
    return out


def parse_config(text: str, path="<string>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(path, None, f"not a valid INI file: {exc}") from exc
    known = {"model", "mia", "gbfl", "loss", "train", "trigger", "synth"}
    extra = set(cp.sections()) - known
    if extra:
        raise ConfigError(path, None, f"unknown sections {sorted(extra)}")

    def sec(name):
        return dict(cp[name]) if cp.has_section(name) else None

    mia = _fill(MiaConfig, sec("mia"), path, "mia")
    gbfl = _fill(GbflConfig, sec("gbfl"), path, "gbfl")
    model = _fill(ModelConfig, sec("model"), path, "model", mia=mia, gbfl=gbfl)
    loss = _fill(LossConfig, sec("loss"), path, "loss")
    train = _fill(TrainConfig, sec("train"), path, "train")
    trig_sec = sec("trigger")
    per_action = {}
    if trig_sec is not None and "per_action" in trig_sec:
        try:
            per_action = _per_action(trig_sec["per_action"])
        except ValueError as exc:
            raise ConfigError(path, "trigger", f"per_action: {exc}") from exc
        del trig_sec["per_action"]
    trigger = _fill(TriggerConfig, trig_sec, path, "trigger", per_action=per_action)
    synth = _fill(CorpusConfig, sec("synth"), path, "synth")
    return RunConfig(model, loss, train, trigger, synth)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(path, None, f"cannot read file: {exc}") from exc
    return parse_config(text, path)


def dump_config(cfg: RunConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str

    def put(name, obj, skip=()):
        cp[name] = {f.name: _format(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                    if f.name not in skip}

    put("model", cfg.model, skip=("mia", "gbfl"))
    put("mia", cfg.model.mia)
    put("gbfl", cfg.model.gbfl)
    put("loss", cfg.loss)
    put("train", cfg.train)
    put("trigger", cfg.trigger, skip=("per_action",))
    if cfg.trigger.per_action:
        cp["trigger"]["per_action"] = ", ".join(
            f"{a}:{e!r}:{x!r}" for a, (e, x) in cfg.trigger.per_action.items())
    put("synth", cfg.synth)
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def save_config(path, cfg: RunConfig) -> None:
    Path(path).write_text(dump_config(cfg))
