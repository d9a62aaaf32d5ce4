"""Trained-model persistence and tracer construction."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

from . import bkt, dkt, pfa
from .scenario import Scenario, Tracer

AnyModel = Union[bkt.BktModel, pfa.PfaModel, dkt.DktModel]

FAMILIES = ("bkt", "pfa", "dkt")
MODEL_FILENAMES = {"bkt": "bkt.json", "pfa": "pfa.json", "dkt": "dkt.npz"}


def model_family(model: AnyModel) -> str:
    if isinstance(model, bkt.BktModel):
        return "bkt"
    if isinstance(model, pfa.PfaModel):
        return "pfa"
    if isinstance(model, dkt.DktModel):
        return "dkt"
    raise TypeError(f"unknown model type {type(model).__name__}")


def save_model(model: AnyModel, path) -> None:
    family = model_family(model)
    if family == "dkt":
        dkt.save(model, path)
    elif family == "bkt":
        bkt.save(model, path)
    else:
        pfa.save(model, path)


def load_model(path) -> AnyModel:
    path = Path(path)
    if path.suffix == ".npz":
        return dkt.load(path)
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    family = payload.get("family")
    if family == "bkt":
        return bkt.BktModel.from_dict(payload)
    if family == "pfa":
        return pfa.PfaModel.from_dict(payload)
    raise ValueError(f"unrecognized model file {path} (family={family!r})")


def default_model_path(models_dir, family: str) -> Path:
    return Path(models_dir) / MODEL_FILENAMES[family]


def save_models_dir(models: dict, models_dir) -> None:
    models_dir = Path(models_dir)
    models_dir.mkdir(parents=True, exist_ok=True)
    for family, model in models.items():
        save_model(model, default_model_path(models_dir, family))


def load_models_dir(models_dir, families=FAMILIES, require_all: bool = False) -> dict:
    """Load the conventional model files from a directory.

    Missing families are skipped unless require_all is set.
    """
    models = {}
    for family in families:
        path = default_model_path(models_dir, family)
        if path.exists():
            models[family] = load_model(path)
        elif require_all:
            raise FileNotFoundError(f"missing trained model file {path}")
    return models


def make_tracer(model: AnyModel, scenario: Scenario) -> Tracer:
    family = model_family(model)
    if family == "bkt":
        return bkt.BktTracer(model, scenario)
    if family == "pfa":
        return pfa.PfaTracer(model, scenario)
    return dkt.DktTracer(model, scenario)
