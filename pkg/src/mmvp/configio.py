"""Flat key-value config files: one ``key = value`` per line, ``#`` comments.

List-valued entries (sweep axes) are comma-separated. This format is shared
by generation, solver and experiment configs.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

__all__ = [
    "parse_flat",
    "format_flat",
    "read_flat",
    "write_flat",
    "as_int",
    "as_float",
    "as_str",
    "as_optional_int",
    "as_number_or_list",
    "as_str_list",
]


class ConfigError(ValueError):
    """Malformed or incomplete flat config."""


def parse_flat(text: str) -> dict:
    """Parse flat config text into an ordered string-to-string mapping."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value.strip()
    return out


def format_flat(mapping: dict) -> str:
    lines = []
    for key, value in mapping.items():
        if isinstance(value, (list, tuple)):
            value = ", ".join(_scalar_str(v) for v in value)
        else:
            value = _scalar_str(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def read_flat(path: Union[str, Path]) -> dict:
    return parse_flat(Path(path).read_text())


def write_flat(mapping: dict, path: Union[str, Path]) -> None:
    Path(path).write_text(format_flat(mapping))


def _scalar_str(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _require(mapping: dict, key: str, default):
    if key in mapping:
        return mapping[key]
    if default is not _MISSING:
        return default
    raise ConfigError(f"missing required key {key!r}")


_MISSING = object()


def as_int(mapping: dict, key: str, default=_MISSING) -> int:
    value = _require(mapping, key, default)
    if value is default and key not in mapping:
        return value
    try:
        return int(str(value))
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected integer, got {value!r}") from exc


def as_float(mapping: dict, key: str, default=_MISSING) -> float:
    value = _require(mapping, key, default)
    if value is default and key not in mapping:
        return value
    try:
        return float(str(value))
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected number, got {value!r}") from exc


def as_str(mapping: dict, key: str, default=_MISSING) -> str:
    return str(_require(mapping, key, default))


def as_optional_int(mapping: dict, key: str) -> Optional[int]:
    if key not in mapping or str(mapping[key]).strip() in ("", "none"):
        return None
    return as_int(mapping, key)


def as_number_or_list(mapping: dict, key: str, default=_MISSING):
    """Scalar number, or a list of numbers when the value holds commas."""
    value = _require(mapping, key, default)
    if key not in mapping:
        return value
    text = str(value)
    if "," in text:
        return [_number(part, key) for part in text.split(",") if part.strip()]
    return _number(text, key)


def as_str_list(mapping: dict, key: str, default=_MISSING) -> list:
    value = _require(mapping, key, default)
    if key not in mapping:
        return list(value)
    if isinstance(value, (list, tuple)):
        return list(value)
    return [part.strip() for part in str(value).split(",") if part.strip()]


def _number(text: str, key: str):
    text = text.strip()
    try:
        as_float_value = float(text)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected number, got {text!r}") from exc
    as_int_value = int(as_float_value)
    if as_int_value == as_float_value and "." not in text and "e" not in text.lower():
        return as_int_value
    return as_float_value
