"""Pipeline configuration.

A single JSON file binds backends, the model registry, retrieval database,
and engine defaults. String values may reference environment variables as
``${VAR}`` (intended for tokens). A fixed set of ``FABLEMIX_*`` environment
variables overrides the file after interpolation. Relative paths are
resolved against the config file's directory and must exist at load time.
"""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, replace
from pathlib import Path

from .audio import DEFAULT_SAMPLE_RATE
from .cues import DEFAULT_SFX_DURATION, DEFAULT_SFX_VOLUME
from .errors import ConfigError
from .prosody import ALPHA_MAX
from .retrieval import DEFAULT_MOS_THRESHOLD
from .script import DEFAULT_PARALINGUISTIC_LIBRARY
from .selection import DEFAULT_REGISTRY, Registry, load_registry

ENV_PREFIX = "FABLEMIX_"
SUPPORTED_SAMPLE_RATES = (16000, 22050, 24000, 44100, 48000)
ALPHA_POLICIES = ("fixed", "planner")
BACKEND_TYPES = ("mock", "http")
DEFAULT_GAP_SECONDS = 0.25
DEFAULT_PAIR_COUNT = 1
DEFAULT_ALPHA = 1.0
DEFAULT_PARALLELISM = 4

_VAR_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


@dataclass(frozen=True)
class BackendConfig:
    type: str = "mock"
    url: str | None = None
    token: str | None = None
    seed: int = 0
    judge_fixtures: Path | None = None
    # Some decoders expect unit-norm speaker embeddings; renormalize the
    # emotion-adjusted embedding before synthesis when set.
    unit_speaker_embeddings: bool = False

    def __post_init__(self):
        if self.type not in BACKEND_TYPES:
            raise ConfigError(f"backend.type must be one of {BACKEND_TYPES}, got {self.type!r}")
        if self.type == "http" and not self.url:
            raise ConfigError("backend.type 'http' requires backend.url")


@dataclass(frozen=True)
class AlphaConfig:
    """Emotion intensity: a fixed value, or per-sub-sentence from the planner."""

    policy: str = "fixed"
    value: float = DEFAULT_ALPHA
    max: float = ALPHA_MAX

    def __post_init__(self):
        if self.policy not in ALPHA_POLICIES:
            raise ConfigError(f"alpha.policy must be one of {ALPHA_POLICIES}, got {self.policy!r}")
        if not self.max > 0:
            raise ConfigError("alpha.max must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    backend: BackendConfig = BackendConfig()
    sample_rate: int = DEFAULT_SAMPLE_RATE
    mos_threshold: float = DEFAULT_MOS_THRESHOLD
    pair_count: int = DEFAULT_PAIR_COUNT
    alpha: AlphaConfig = AlphaConfig()
    sfx_duration: float = DEFAULT_SFX_DURATION
    sfx_volume: float = DEFAULT_SFX_VOLUME
    gap_seconds: float = DEFAULT_GAP_SECONDS
    paralinguistic_library: tuple[str, ...] = DEFAULT_PARALINGUISTIC_LIBRARY
    retrieval_db: Path | None = None
    registry: Registry = DEFAULT_REGISTRY
    parallelism: int = DEFAULT_PARALLELISM
    out_dir: Path = Path("out")

    def __post_init__(self):
        if self.sample_rate not in SUPPORTED_SAMPLE_RATES:
            raise ConfigError(
                f"sample_rate must be one of {SUPPORTED_SAMPLE_RATES}, got {self.sample_rate}")
        if not 1.0 <= self.mos_threshold <= 5.0:
            raise ConfigError("mos_threshold must be in [1, 5]")
        if self.pair_count < 1:
            raise ConfigError("pair_count must be >= 1")
        if not self.sfx_duration > 0:
            raise ConfigError("sfx.duration must be positive")
        if not 0.0 < self.sfx_volume <= 1.0:
            raise ConfigError("sfx.volume must be in (0, 1]")
        if self.gap_seconds < 0:
            raise ConfigError("gap_seconds must be non-negative")
        if not self.paralinguistic_library:
            raise ConfigError("paralinguistic_library must not be empty")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")


def default_config() -> PipelineConfig:
    return PipelineConfig()


def _interpolate(value, pointer: str):
    """Expand ${VAR} in every string, recursively."""
    if isinstance(value, str):
        def expand(match):
            name = match.group(1)
            if name not in os.environ:
                raise ConfigError(f"{pointer}: environment variable {name!r} is not set")
            return os.environ[name]
        return _VAR_RE.sub(expand, value)
    if isinstance(value, list):
        return [_interpolate(v, f"{pointer}/{i}") for i, v in enumerate(value)]
    if isinstance(value, dict):
        return {k: _interpolate(v, f"{pointer}/{k}") for k, v in value.items()}
    return value


def _parse_int(name: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from exc


def _parse_float(name: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name} must be a number, got {raw!r}") from exc


# env var name (without prefix) -> (section key or None, field key, parser)
_ENV_OVERRIDES = {
    "BACKEND_TYPE": ("backend", "type", str),
    "BACKEND_URL": ("backend", "url", str),
    "BACKEND_TOKEN": ("backend", "token", str),
    "BACKEND_SEED": ("backend", "seed", _parse_int),
    "SAMPLE_RATE": (None, "sample_rate", _parse_int),
    "MOS_THRESHOLD": (None, "mos_threshold", _parse_float),
    "PAIR_COUNT": (None, "pair_count", _parse_int),
    "GAP_SECONDS": (None, "gap_seconds", _parse_float),
    "PARALLELISM": (None, "parallelism", _parse_int),
    "OUT_DIR": (None, "out_dir", str),
}


def _apply_env_overrides(raw: dict, environ) -> dict:
    for suffix, (section, key, parse) in _ENV_OVERRIDES.items():
        name = ENV_PREFIX + suffix
        if name not in environ:
            continue
        value = parse(name, environ[name]) if parse is not str else environ[name]
        if section is None:
            raw[key] = value
        else:
            raw.setdefault(section, {})[key] = value
    return raw


def _expect(obj: dict, key: str, kind, default, pointer: str):
    if key not in obj:
        return default
    value = obj[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (isinstance(value, bool) and kind is not bool):
        raise ConfigError(f"{pointer}/{key}: expected {kind.__name__}")
    return value


def _resolve_path(raw, base: Path, pointer: str, must_exist: bool = True) -> Path:
    if not isinstance(raw, str) or not raw:
        raise ConfigError(f"{pointer}: expected a path string")
    path = Path(raw)
    if not path.is_absolute():
        path = base / path
    if must_exist and not path.exists():
        raise ConfigError(f"{pointer}: path does not exist: {path}")
    return path


def load_library(path: Path) -> tuple[str, ...]:
    """A paralinguistic library file is a JSON array of token strings."""
    try:
        tokens = json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read paralinguistic library {path}: {exc}") from exc
    if not isinstance(tokens, list) or any(not isinstance(t, str) or not t for t in tokens):
        raise ConfigError(f"{path}: expected a JSON array of non-empty strings")
    if len(set(tokens)) != len(tokens):
        raise ConfigError(f"{path}: duplicate tokens in library")
    return tuple(tokens)


def config_from_dict(raw: dict, base_dir: Path | None = None) -> PipelineConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a JSON object")
    base = Path(base_dir) if base_dir is not None else Path.cwd()

    backend_raw = _expect(raw, "backend", dict, {}, "")
    fixtures = None
    if backend_raw.get("judge_fixtures") is not None:
        fixtures = _resolve_path(backend_raw["judge_fixtures"], base, "/backend/judge_fixtures")
    backend = BackendConfig(
        type=_expect(backend_raw, "type", str, "mock", "/backend"),
        url=_expect(backend_raw, "url", str, None, "/backend"),
        token=_expect(backend_raw, "token", str, None, "/backend"),
        seed=_expect(backend_raw, "seed", int, 0, "/backend"),
        judge_fixtures=fixtures,
        unit_speaker_embeddings=_expect(backend_raw, "unit_speaker_embeddings",
                                        bool, False, "/backend"),
    )

    alpha_raw = _expect(raw, "alpha", dict, {}, "")
    alpha = AlphaConfig(
        policy=_expect(alpha_raw, "policy", str, "fixed", "/alpha"),
        value=_expect(alpha_raw, "value", float, DEFAULT_ALPHA, "/alpha"),
        max=_expect(alpha_raw, "max", float, ALPHA_MAX, "/alpha"),
    )

    sfx_raw = _expect(raw, "sfx", dict, {}, "")

    library = DEFAULT_PARALINGUISTIC_LIBRARY
    if raw.get("paralinguistic_library") is not None:
        library = load_library(
            _resolve_path(raw["paralinguistic_library"], base, "/paralinguistic_library"))

    registry = DEFAULT_REGISTRY
    if raw.get("registry") is not None:
        registry = load_registry(_resolve_path(raw["registry"], base, "/registry"))

    retrieval_db = None
    if raw.get("retrieval_db") is not None:
        retrieval_db = _resolve_path(raw["retrieval_db"], base, "/retrieval_db")

    out_dir = Path(_expect(raw, "out_dir", str, "out", ""))
    if not out_dir.is_absolute():
        out_dir = base / out_dir

    return PipelineConfig(
        backend=backend,
        sample_rate=_expect(raw, "sample_rate", int, DEFAULT_SAMPLE_RATE, ""),
        mos_threshold=_expect(raw, "mos_threshold", float, DEFAULT_MOS_THRESHOLD, ""),
        pair_count=_expect(raw, "pair_count", int, DEFAULT_PAIR_COUNT, ""),
        alpha=alpha,
        sfx_duration=_expect(sfx_raw, "duration", float, DEFAULT_SFX_DURATION, "/sfx"),
        sfx_volume=_expect(sfx_raw, "volume", float, DEFAULT_SFX_VOLUME, "/sfx"),
        gap_seconds=_expect(raw, "gap_seconds", float, DEFAULT_GAP_SECONDS, ""),
        paralinguistic_library=library,
        retrieval_db=retrieval_db,
        registry=registry,
        parallelism=_expect(raw, "parallelism", int, DEFAULT_PARALLELISM, ""),
        out_dir=out_dir,
    )


def load_config(path, environ=None) -> PipelineConfig:
    environ = os.environ if environ is None else environ
    path = Path(path)
    try:
        raw = json.loads(path.read_text("utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    raw = _interpolate(raw, "")
    raw = _apply_env_overrides(raw, environ)
    return config_from_dict(raw, base_dir=path.parent.resolve())


def with_seed(config: PipelineConfig, seed: int) -> PipelineConfig:
    return replace(config, backend=replace(config.backend, seed=seed))


def make_backend(config: PipelineConfig):
    """Instantiate the backend the config names. Import here keeps startup light."""
    if config.backend.type == "http":
        from .backends.client import HTTPBackendClient
        return HTTPBackendClient(config.backend.url, token=config.backend.token)
    from .backends.mock import MockBackend
    fixtures = None
    if config.backend.judge_fixtures is not None:
        try:
            fixtures = json.loads(config.backend.judge_fixtures.read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read judge fixtures: {exc}") from exc
        if not isinstance(fixtures, dict):
            raise ConfigError("judge fixtures must be a JSON object")
    return MockBackend(seed=config.backend.seed, registry=config.registry,
                       judge_fixtures=fixtures, sample_rate=config.sample_rate)
