"""Versioned run defaults (payoff parameters, delta, beliefs, optimizer settings)."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .calibration import FitOptions
from .data_io import InteractionConfig
from .disclosure import BeliefModel
from .game import DeltaRule, GameForm
from .payoff import PayoffParams

DEFAULTS_FILE = "defaults.json"


def _data_text(name: str) -> str:
    return resources.files("ehmi.data").joinpath(name).read_text()


def load_defaults(path: Optional[Union[str, Path]] = None) -> dict:
    text = Path(path).read_text() if path else _data_text(DEFAULTS_FILE)
    return json.loads(text)


def default_params(cfg: Optional[dict] = None) -> PayoffParams:
    cfg = cfg or load_defaults()
    return PayoffParams.loads(_data_text(cfg["params"]))


def default_delta(cfg: Optional[dict] = None) -> DeltaRule:
    return DeltaRule(float((cfg or load_defaults())["delta"]))


def default_form(cfg: Optional[dict] = None) -> GameForm:
    return GameForm.parse((cfg or load_defaults())["form"])


def default_beliefs(cfg: Optional[dict] = None) -> BeliefModel:
    return BeliefModel(**(cfg or load_defaults())["beliefs"])


def default_fit_options(cfg: Optional[dict] = None, seed: int = 0) -> FitOptions:
    return FitOptions(seed=seed, **(cfg or load_defaults())["fit"])


def default_interaction(cfg: Optional[dict] = None) -> InteractionConfig:
    return InteractionConfig(**(cfg or load_defaults())["interaction"])


def load_beliefs(path: Union[str, Path]) -> BeliefModel:
    """Belief file: JSON ``{"rush_accel": .., "yield_accel": ..}``."""
    d = json.loads(Path(path).read_text())
    return BeliefModel(float(d["rush_accel"]), float(d["yield_accel"]))


def bundled_json(name: str) -> dict:
    return json.loads(_data_text(name))
