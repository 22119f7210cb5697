"""Flat key-value config files (section.field=value) and seed derivation."""
from __future__ import annotations

import dataclasses
import hashlib
import typing
from pathlib import Path

from .detector import OracleConfig
from .trackers import KcfParams, MedianFlowParams, MosseParams, TrackerKind

# Keys that collide with Python keywords map onto trailing-underscore fields.
_FIELD_ALIASES = {"lambda": "lambda_"}

PARAM_SECTIONS = {
    "mosse": MosseParams,
    "kcf": KcfParams,
    "medianflow": MedianFlowParams,
    "oracle": OracleConfig,
}

_TRACKER_SECTION = {
    TrackerKind.MOSSE: "mosse",
    TrackerKind.KCF: "kcf",
    TrackerKind.MEDIANFLOW: "medianflow",
}


def parse_kv_file(path: str | Path) -> dict[str, str]:
    """Read `section.field=value` lines; blank lines and # comments are skipped."""
    out: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if not key or "." not in key:
            raise ValueError(f"{path}:{lineno}: keys must look like section.field")
        out[key] = value.strip()
    return out


def _coerce(raw: str, target_type) -> object:
    if target_type is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"cannot read {raw!r} as a boolean")
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    if target_type is str:
        return raw
    origin = typing.get_origin(target_type)
    if origin is tuple:
        inner = typing.get_args(target_type)[0]
        return tuple(_coerce(part.strip(), inner) for part in raw.split(",") if part.strip())
    raise ValueError(f"unsupported config field type {target_type}")


def section_overrides(overrides: dict[str, str], section: str) -> dict[str, str]:
    prefix = section + "."
    return {k[len(prefix):]: v for k, v in overrides.items() if k.startswith(prefix)}


def build_section(cls, overrides: dict[str, str], section: str):
    """Instantiate a params dataclass with defaults plus overrides for one section."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for field_key, raw in section_overrides(overrides, section).items():
        name = _FIELD_ALIASES.get(field_key, field_key)
        if name not in names:
            raise ValueError(f"unknown config key {section}.{field_key}")
        kwargs[name] = _coerce(raw, hints[name])
    return cls(**kwargs)


def tracker_params_from(overrides: dict[str, str], kind: TrackerKind):
    section = _TRACKER_SECTION[kind]
    return build_section(PARAM_SECTIONS[section], overrides, section)


def validate_known_sections(overrides: dict[str, str]) -> None:
    known = set(PARAM_SECTIONS) | {"ncc"}
    for key in overrides:
        section = key.split(".", 1)[0]
        if section not in known:
            raise ValueError(f"unknown config section {section!r} in key {key!r}")


def derive_seed(master: int, label: str) -> int:
    """Stable component seed from a master seed and a role label."""
    digest = hashlib.sha256(f"{master}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & 0x7FFFFFFFFFFFFFFF
