"""Heatmap manifest reading/writing, validated against the bundled JSON schema.

The schema file is the interchange contract: any producer (this package's
explain command or an external exporter) must emit a manifest this module
accepts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import LoadError

SCHEMA_VERSION = "explain-manifest/1"


def schema_path() -> Path:
    return Path(resources.files("attrkit") / "schemas" / "explain_manifest.schema.json")


def load_schema() -> dict:
    return json.loads(schema_path().read_text())


@dataclass(frozen=True)
class HeatmapEntry:
    image_id: str
    method: str
    heatmap_path: Path
    target: int


@dataclass(frozen=True)
class ExplainManifest:
    model_id: str
    seed: int
    config: dict
    config_hash: str
    entries: list[HeatmapEntry]


def validate_explain_manifest(payload: dict) -> None:
    try:
        jsonschema.validate(payload, load_schema())
    except jsonschema.ValidationError as exc:
        raise LoadError(f"explain manifest failed schema validation: {exc.message}") from exc


def write_explain_manifest(
    path,
    model_id: str,
    seed: int,
    config: dict,
    config_hash: str,
    entries: list[dict],
) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "model_id": model_id,
        "seed": seed,
        "config": config,
        "config_hash": config_hash,
        "entries": entries,
    }
    validate_explain_manifest(payload)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_explain_manifest(path) -> ExplainManifest:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError:
        raise LoadError(f"{path}: explain manifest not found") from None
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path}: manifest is not valid JSON ({exc})") from exc
    validate_explain_manifest(payload)
    base = path.parent
    entries = [
        HeatmapEntry(
            image_id=e["image_id"],
            method=e["method"],
            heatmap_path=base / e["heatmap_path"],
            target=int(e["target"]),
        )
        for e in payload["entries"]
    ]
    return ExplainManifest(
        model_id=payload["model_id"],
        seed=int(payload["seed"]),
        config=payload["config"],
        config_hash=str(payload.get("config_hash", "")),
        entries=entries,
    )
