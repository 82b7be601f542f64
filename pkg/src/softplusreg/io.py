"""Versioned JSON model files.

A file holds one fitted model, or two for a fused (both-orientation) fit.
Floats are written with ``repr`` precision, so reading a file back gives
bit-identical coefficients and therefore bit-identical predictions.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import DataError, VersionMismatchError
from .model import FittedModel, FusedModel, Standardization

FORMAT_NAME = "softplusreg-model"
FORMAT_VERSION = 1

AnyModel = Union[FittedModel, FusedModel]


def _model_to_dict(m: FittedModel, trace_path: Optional[str]) -> dict:
    return {
        "variant": m.variant,
        "T": m.T,
        "K_active": m.K,
        "dim": m.dim,
        "orientation": int(m.orientation),
        "experts": [
            {"r": float(rk), "beta": bk.tolist()} for rk, bk in zip(m.r, m.beta)
        ],
        "standardization": None if m.standardization is None else m.standardization.to_dict(),
        "hyperparams": m.meta.get("hyperparams"),
        "seed": m.meta.get("seed"),
        "iter": m.meta.get("iter"),
        "provenance": m.meta.get("provenance"),
        "log_lik": float(m.log_lik),
        "trace_path": trace_path,
    }


def _model_from_dict(d: dict) -> FittedModel:
    try:
        T, dim = int(d["T"]), int(d["dim"])
        experts = d["experts"]
        r = np.array([e["r"] for e in experts], dtype=float)
        beta = np.array([e["beta"] for e in experts], dtype=float).reshape(len(experts), T, dim)
        std = d.get("standardization")
        meta = {k: d.get(k) for k in ("hyperparams", "seed", "iter", "provenance", "trace_path")}
        return FittedModel(
            r=r,
            beta=beta,
            orientation=int(d["orientation"]),
            standardization=None if std is None else Standardization.from_dict(std),
            log_lik=float(d["log_lik"]),
            variant=d["variant"],
            meta=meta,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed model entry: {exc}") from None


def dumps(m: AnyModel, trace_path: Optional[str] = None) -> str:
    models = [m.model_pos, m.model_neg] if isinstance(m, FusedModel) else [m]
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "fused": isinstance(m, FusedModel),
        "models": [_model_to_dict(x, trace_path) for x in models],
    }
    return json.dumps(doc, indent=1) + "\n"


def loads(text: str) -> AnyModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise DataError("not a softplusreg model file")
    if doc.get("version") != FORMAT_VERSION:
        raise VersionMismatchError(
            f"model file version {doc.get('version')!r} is not supported "
            f"(this build reads version {FORMAT_VERSION})"
        )
    models = [_model_from_dict(d) for d in doc.get("models", [])]
    if doc.get("fused"):
        if len(models) != 2:
            raise DataError("fused model file must hold exactly two models")
        pos, neg = sorted(models, key=lambda x: x.orientation)
        return FusedModel(pos, neg)
    if len(models) != 1:
        raise DataError("single model file must hold exactly one model")
    return models[0]


def save_model(m: AnyModel, path, trace_path: Optional[str] = None) -> None:
    Path(path).write_text(dumps(m, trace_path))


def load_model(path) -> AnyModel:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc.strerror}") from None
    return loads(text)
