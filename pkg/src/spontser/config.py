"""Run configuration: one INI file of per-stage sections plus command-line overrides.

Precedence is flag > file > built-in default. Every random choice in a run
derives from the single root ``seed``.

Example file::

    [run]
    seed = 3

    [lld]
    n_mfcc = 12

    [spont]
    C = 2.0
    kernel = rbf

    [sweep]
    ells = 1,2,4,6,8,10
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import BadConfig
from .harness import ABLATION_MODES, SplitSpec
from .lld import LLDConfig
from .models import EMOTION_CONFIG, JOINT_CONFIG, SPONT_CONFIG
from .pipeline import FrameConfig
from .pooling import PoolConfig
from .svm import KernelSpec, TrainConfig
from .synth import SynthSpec

DEFAULT_ELLS = (1, 2, 4, 6, 8, 10)

# fields whose default is None but whose value is not numeric
_STRING_FIELDS = {("split", "holdout_session")}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    frame: FrameConfig = field(default_factory=FrameConfig)
    lld: LLDConfig = field(default_factory=LLDConfig)
    pool: PoolConfig = field(default_factory=PoolConfig)
    emotion: TrainConfig = EMOTION_CONFIG
    spont: TrainConfig = SPONT_CONFIG
    joint: TrainConfig = JOINT_CONFIG
    split: SplitSpec = field(default_factory=SplitSpec)
    synth: SynthSpec = field(default_factory=SynthSpec)
    ell: int = 10  # hierarchical router context
    ells: tuple = DEFAULT_ELLS  # sweep grid
    ablate_ell: int = 1
    ablate_mode: str = ABLATION_MODES[0]  # or "all"

    def validate(self):
        self.frame.validate()
        self.lld.validate()
        self.pool.validate()
        self.split.validate()
        self.synth.validate()
        if self.ell < 1 or self.ablate_ell < 1:
            raise BadConfig(f"context lengths must be >= 1 (ell={self.ell}, ablate ell={self.ablate_ell})")
        if not self.ells or min(self.ells) < 1:
            raise BadConfig(f"sweep ells must be a nonempty list of positive integers (got {self.ells})")
        if self.ablate_mode not in ABLATION_MODES + ("all",):
            raise BadConfig(f"unknown ablation mode {self.ablate_mode!r}")
        return self

    def seeded(self, seed):
        """Push one root seed into every stage that draws random numbers."""
        seed = int(seed)
        return replace(
            self,
            seed=seed,
            emotion=replace(self.emotion, seed=seed),
            spont=replace(self.spont, seed=seed),
            joint=replace(self.joint, seed=seed),
            split=replace(self.split, seed=seed),
            synth=replace(self.synth, seed=seed),
        )


def parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise BadConfig(f"not a boolean: {text!r}")


def parse_ells(text):
    try:
        return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)
    except ValueError:
        raise BadConfig(f"ells must be comma-separated integers (got {text!r})") from None


def _coerce(section, key, raw, default):
    raw = raw.strip()
    try:
        if (section, key) in _STRING_FIELDS:
            return None if raw.lower() == "none" else raw
        if isinstance(default, bool):
            return parse_bool(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if default is None:
            if raw.lower() == "none":
                return None
            try:
                return int(raw)
            except ValueError:
                return float(raw)
        return raw
    except ValueError:
        raise BadConfig(f"[{section}] {key}: cannot parse {raw!r}") from None


def _apply(obj, section, items):
    names = {f.name for f in fields(obj)}
    changes = {}
    for key, raw in items:
        if key not in names or key == "tone_bands":
            raise BadConfig(f"[{section}] unknown key {key!r}")
        changes[key] = _coerce(section, key, raw, getattr(obj, key))
    return replace(obj, **changes)


def _apply_train(cfg, section, items):
    kind, gamma = cfg.kernel.kind, cfg.kernel.gamma
    changes = {}
    for key, raw in items:
        if key == "kernel":
            kind = raw.strip()
        elif key == "gamma":
            gamma = _coerce(section, key, raw, None)
        elif key in ("C", "tolerance"):
            changes[key] = _coerce(section, key, raw, 1.0)
        elif key == "max_passes":
            changes[key] = _coerce(section, key, raw, None)
        else:
            raise BadConfig(f"[{section}] unknown key {key!r}")
    if kind == "linear":
        gamma = None
    return replace(cfg, kernel=KernelSpec(kind, gamma), **changes)


_SIMPLE = ("frame", "lld", "pool", "split", "synth")
_TRAIN = ("emotion", "spont", "joint")


def load_run_config(path=None, base=RunConfig()):
    """Merge an INI file over ``base``; ``None`` returns ``base`` unchanged."""
    cfg = base
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep "C" upper-case
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise BadConfig(f"{path}: {exc}") from None
    seed = None
    for section in parser.sections():
        items = list(parser.items(section))
        if section in _SIMPLE:
            cfg = replace(cfg, **{section: _apply(getattr(cfg, section), section, items)})
        elif section in _TRAIN:
            cfg = replace(cfg, **{section: _apply_train(getattr(cfg, section), section, items)})
        elif section == "run":
            for key, raw in items:
                if key != "seed":
                    raise BadConfig(f"[run] unknown key {key!r}")
                seed = _coerce(section, key, raw, 0)
        elif section == "hierarchical":
            for key, raw in items:
                if key != "ell":
                    raise BadConfig(f"[hierarchical] unknown key {key!r}")
                cfg = replace(cfg, ell=_coerce(section, key, raw, 0))
        elif section == "sweep":
            for key, raw in items:
                if key != "ells":
                    raise BadConfig(f"[sweep] unknown key {key!r}")
                cfg = replace(cfg, ells=parse_ells(raw))
        elif section == "ablate":
            for key, raw in items:
                if key == "ell":
                    cfg = replace(cfg, ablate_ell=_coerce(section, key, raw, 0))
                elif key == "mode":
                    cfg = replace(cfg, ablate_mode=raw.strip())
                else:
                    raise BadConfig(f"[ablate] unknown key {key!r}")
        else:
            raise BadConfig(f"{Path(path).name}: unknown section [{section}]")
    if seed is not None:
        cfg = cfg.seeded(seed)
    return cfg
