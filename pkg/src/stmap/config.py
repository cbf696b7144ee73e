"""Flat key-value experiment configuration.

One ``key = value`` pair per line, dotted keys for sections, ``#`` comments.
Diff-friendly and trivially parseable; the pipeline hashes the canonical
serialization into its manifest.
"""

from __future__ import annotations

import hashlib


class ConfigError(ValueError):
    """Bad key, value, or file syntax."""


class Config:
    def __init__(self, data: dict[str, str] | None = None):
        self.data: dict[str, str] = dict(data or {})

    @classmethod
    def parse(cls, text: str) -> "Config":
        data: dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, _, val = line.partition("=")
            data[key.strip()] = val.strip()
        return cls(data)

    @classmethod
    def load(cls, path) -> "Config":
        with open(path) as f:
            return cls.parse(f.read())

    def canonical(self) -> str:
        return "".join(f"{k} = {self.data[k]}\n" for k in sorted(self.data))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.canonical())

    def __contains__(self, key: str) -> bool:
        return key in self.data

    def get(self, key: str, default: str | None = None) -> str | None:
        return self.data.get(key, default)

    def get_str(self, key: str, default: str | None = None) -> str:
        val = self.data.get(key, default)
        if val is None:
            raise ConfigError(f"missing config key {key!r}")
        return val

    def get_float(self, key: str, default: float | None = None) -> float:
        if key not in self.data:
            if default is None:
                raise ConfigError(f"missing config key {key!r}")
            return default
        try:
            return float(self.data[key])
        except ValueError as e:
            raise ConfigError(f"config key {key!r}: {e}") from e

    def get_int(self, key: str, default: int | None = None) -> int:
        if key not in self.data:
            if default is None:
                raise ConfigError(f"missing config key {key!r}")
            return default
        try:
            return int(self.data[key])
        except ValueError as e:
            raise ConfigError(f"config key {key!r}: {e}") from e

    def get_bool(self, key: str, default: bool | None = None) -> bool:
        if key not in self.data:
            if default is None:
                raise ConfigError(f"missing config key {key!r}")
            return default
        val = self.data[key].lower()
        if val in ("1", "true", "yes", "on"):
            return True
        if val in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key {key!r}: expected a boolean, got {val!r}")

    def get_list(self, key: str, default: str | None = None) -> list[str]:
        val = self.data.get(key, default)
        if val is None:
            raise ConfigError(f"missing config key {key!r}")
        return [part.strip() for part in val.split(",") if part.strip()]

    def section(self, prefix: str) -> dict[str, str]:
        dot = prefix + "."
        return {k[len(dot) :]: v for k, v in self.data.items() if k.startswith(dot)}
