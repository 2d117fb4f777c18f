"""Plain key=value config files for backend settings.

Precedence is resolved by the CLI: flags override file values, which override
built-in defaults; the API key always comes from the environment.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path


@dataclass(frozen=True)
class BackendSettings:
    endpoint: str | None = None
    model: str = "t3-offline"
    temperature: float = 0.0
    parallelism: int = 1
    cache_dir: str | None = None
    retries: int = 3
    backoff_s: float = 1.0
    timeout_s: float = 120.0

    def merged_with(self, **overrides: object) -> "BackendSettings":
        present = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **present)  # type: ignore[arg-type]


_FIELD_TYPES = {
    "endpoint": str,
    "model": str,
    "temperature": float,
    "parallelism": int,
    "cache_dir": str,
    "retries": int,
    "backoff_s": float,
    "timeout_s": float,
}


def parse_config_file(path: str | Path) -> BackendSettings:
    """Read key=value lines; # starts a comment; unknown keys are an error."""
    values: dict[str, object] = {}
    for line_no, raw in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ValueError(f"{path}:{line_no}: unknown key {key!r}")
        try:
            values[key] = _FIELD_TYPES[key](value)
        except ValueError as exc:
            raise ValueError(f"{path}:{line_no}: bad value for {key}: {value!r}") from exc
    return BackendSettings().merged_with(**values)
