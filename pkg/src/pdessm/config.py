"""Plain-text ``key=value`` configuration files with dotted section prefixes.

Example::

    # kernel gallery panel
    grid.h=64
    grid.w=64
    pde.c_hid=1
    pde.tau=1.0
    pde.fx=0.9

Blank lines and ``#`` comments are ignored.  Keys are validated against the
schema of the consuming command; unknown keys are hard errors (with the line
number) so typos cannot silently fall back to defaults.  Matrix values are
comma-separated floats in row-major order; a single float is broadcast to a
multiple of the identity.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ConfigError


def parse_config_text(text: str) -> dict[str, tuple[str, int]]:
    """Parse ``key=value`` lines into ``{key: (raw_value, lineno)}``."""
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError("empty key", lineno)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        entries[key] = (value, lineno)
    return entries


def load_config(path: str) -> dict[str, tuple[str, int]]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    return parse_config_text(text)


class ConfigView:
    """Typed access to parsed entries with unknown-key detection."""

    def __init__(self, entries: dict[str, tuple[str, int]]):
        self._entries = entries
        self._seen: set[str] = set()

    def _raw(self, key: str):
        self._seen.add(key)
        return self._entries.get(key)

    def has(self, key: str) -> bool:
        self._seen.add(key)
        return key in self._entries

    def get_str(self, key: str, default: str | None = None, choices=None) -> str:
        item = self._raw(key)
        if item is None:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        value, lineno = item
        if choices is not None and value not in choices:
            raise ConfigError(f"{key} must be one of {sorted(choices)}, got {value!r}", lineno)
        return value

    def get_int(self, key: str, default: int | None = None, minimum: int | None = None) -> int:
        item = self._raw(key)
        if item is None:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        value, lineno = item
        try:
            parsed = int(value)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {value!r}", lineno) from None
        if minimum is not None and parsed < minimum:
            raise ConfigError(f"{key} must be >= {minimum}, got {parsed}", lineno)
        return parsed

    def get_float(self, key: str, default: float | None = None) -> float:
        item = self._raw(key)
        if item is None:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        value, lineno = item
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {value!r}", lineno) from None

    def get_bool(self, key: str, default: bool) -> bool:
        item = self._raw(key)
        if item is None:
            return default
        value, lineno = item
        lowered = value.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key} must be a boolean, got {value!r}", lineno)

    def get_matrix(self, key: str, rows: int, cols: int, default: np.ndarray | None = None) -> np.ndarray:
        """Row-major comma list; a single value scales the identity."""
        item = self._raw(key)
        if item is None:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        value, lineno = item
        try:
            numbers = [float(part) for part in value.split(",") if part.strip() != ""]
        except ValueError:
            raise ConfigError(f"{key} must be comma-separated numbers", lineno) from None
        if len(numbers) == 1 and rows == cols:
            return numbers[0] * np.eye(rows)
        if len(numbers) != rows * cols:
            raise ConfigError(
                f"{key} needs {rows * cols} entries for a {rows}x{cols} matrix, "
                f"got {len(numbers)}", lineno,
            )
        return np.asarray(numbers).reshape(rows, cols)

    def finish(self):
        """Raise on any key never consumed by the schema (typo protection)."""
        unknown = sorted(set(self._entries) - self._seen)
        if unknown:
            key = unknown[0]
            _, lineno = self._entries[key]
            raise ConfigError(f"unknown key {key!r}", lineno)
