"""Plain-text ``key = value`` config parsing shared by all file formats.

Lines are ``key = value``; blank lines and ``#`` comments are ignored.
Keys may repeat (used for lists, e.g. scene distractors).
"""

from __future__ import annotations

from pathlib import Path


class ConfigError(Exception):
    """A config file failed to parse or contained an unknown/bad key."""


def parse_kv(text: str, source: str = "<string>") -> dict[str, list[str]]:
    """Parse key=value text into key -> list of values (in file order)."""
    out: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out.setdefault(key, []).append(value)
    return out


def load_kv(path: str | Path) -> dict[str, list[str]]:
    p = Path(path)
    return parse_kv(p.read_text(encoding="utf-8"), source=str(p))


def single(kv: dict[str, list[str]], key: str, source: str = "config") -> str:
    values = kv[key]
    if len(values) != 1:
        raise ConfigError(f"{source}: key {key!r} given {len(values)} times, expected once")
    return values[0]


def parse_rgb(text: str, source: str = "config") -> tuple[int, int, int]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"{source}: expected 'r,g,b', got {text!r}")
    try:
        r, g, b = (int(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"{source}: non-integer channel in {text!r}") from exc
    if not all(0 <= c <= 255 for c in (r, g, b)):
        raise ConfigError(f"{source}: channel out of [0, 255] in {text!r}")
    return (r, g, b)


def reject_unknown(kv: dict[str, list[str]], known: set[str], source: str = "config") -> None:
    for key in kv:
        if key not in known:
            raise ConfigError(f"{source}: unknown key {key!r}")
