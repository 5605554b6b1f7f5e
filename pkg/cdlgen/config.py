"""Environment settings and the pipeline config file.

The config file is ``key = value`` lines under ``[section]`` headers. Keys keep
their case and relative paths resolve against the file's directory.
"""

from __future__ import annotations

import configparser
import logging
import os
from enum import StrEnum
from pathlib import Path
from typing import Any, Literal

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, model_validator

from cdlgen import DATA_DIR
from cdlgen.exceptions import ConfigError

load_dotenv()

logger = logging.getLogger(__name__)


class Settings:
    """Process-level settings loaded from environment variables."""

    LOG_LEVEL: str = os.getenv("CDLGEN_LOG_LEVEL", "INFO")
    DATA_DIR: Path = Path(os.getenv("CDLGEN_DATA_DIR", str(DATA_DIR)))


def data_path(*parts: str) -> Path:
    return Settings.DATA_DIR.joinpath(*parts)


class GatewayMode(StrEnum):
    LIVE = "live"
    REPLAY = "replay"
    RECORD = "record"


class CompileBackend(StrEnum):
    BUILTIN = "builtin_validator"
    EXTERNAL = "external_toolchain"


class SelectionMode(StrEnum):
    HARD_RULE = "hard_rule"
    FUZZY = "fuzzy"


class ProviderKind(StrEnum):
    HTTP = "http"
    SCRIPTED = "scripted"


class ProviderConfig(BaseModel):
    """One chat-completion endpoint with a declarative field mapping."""

    name: str
    kind: ProviderKind = ProviderKind.HTTP
    model_id: str
    base_url: str = ""
    auth_env_var: str | None = None
    auth_header: str = "Authorization"
    auth_prefix: str = "Bearer "
    timeout_s: float = Field(default=60.0, gt=0)
    max_tokens: int = Field(default=1024, gt=0)
    temperature: float = Field(default=0.0, ge=0.0, le=2.0)
    system_field: Literal["messages", "system"] = "messages"
    text_path: str = "choices.0.message.content"
    prompt_tokens_path: str = "usage.prompt_tokens"
    completion_tokens_path: str = "usage.completion_tokens"
    extra_headers: dict[str, str] = Field(default_factory=dict)
    script_path: Path | None = None

    @model_validator(mode="after")
    def _check_kind(self) -> ProviderConfig:
        if self.kind is ProviderKind.HTTP and not self.base_url:
            raise ValueError(f"provider {self.name}: base_url is required")
        if self.kind is ProviderKind.SCRIPTED and self.script_path is None:
            raise ValueError(f"provider {self.name}: script_path is required")
        return self


class LibraryConfig(BaseModel):
    root: Path
    version: str
    rename_map: Path | None = None
    index_path: Path | None = None


class PipelineConfig(BaseModel):
    max_compile_iters: int = Field(default=3, ge=1)
    max_sim_iters: int = Field(default=2, ge=1)
    max_eval_iters: int = Field(default=1, ge=1)
    ai_eval: bool = False
    ai_eval_pathway: Literal["trace_based", "code_based"] = "trace_based"
    compile_backend: CompileBackend = CompileBackend.BUILTIN
    selection_mode: SelectionMode = SelectionMode.HARD_RULE
    behavioral_repair: bool = False


class SimulationConfig(BaseModel):
    step_size: float = Field(default=10.0, gt=0)
    horizon: float = Field(default=3600.0, gt=0)
    probe_seed: int = 0


class GatewayConfig(BaseModel):
    mode: GatewayMode = GatewayMode.REPLAY
    cassette: Path | None = None
    selector: str = "default"
    generator: str = "default"
    evaluator: str = "default"


class ToolchainConfig(BaseModel):
    command: str = "omc"
    script_template_path: Path | None = None
    timeout_s: float = Field(default=120.0, gt=0)
    error_pattern: str = r"(?m)^(Error|\[.*\] Error)"


class OutputConfig(BaseModel):
    directory: Path = Path("sessions")


class AppConfig(BaseModel):
    library: LibraryConfig
    pipeline: PipelineConfig = Field(default_factory=PipelineConfig)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    gateway: GatewayConfig = Field(default_factory=GatewayConfig)
    providers: dict[str, ProviderConfig] = Field(default_factory=dict)
    toolchain: ToolchainConfig = Field(default_factory=ToolchainConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def _check_references(self) -> AppConfig:
        if self.gateway.mode in (GatewayMode.REPLAY, GatewayMode.RECORD) and self.gateway.cassette is None:
            raise ValueError(f"gateway mode {self.gateway.mode} requires a cassette path")
        if self.gateway.mode is not GatewayMode.REPLAY:
            for role in ("selector", "generator", "evaluator"):
                name = getattr(self.gateway, role)
                if name not in self.providers:
                    raise ValueError(f"gateway {role} names unknown provider '{name}'")
        return self

    def provider_for(self, role: str) -> ProviderConfig | None:
        return self.providers.get(getattr(self.gateway, role))

    def model_id_for(self, role: str) -> str:
        provider = self.provider_for(role)
        return provider.model_id if provider is not None else getattr(self.gateway, role)

    def snapshot(self) -> dict[str, Any]:
        """Portable view of the settings that shape a session; no filesystem paths."""
        return {
            "library_version": self.library.version,
            "pipeline": self.pipeline.model_dump(mode="json"),
            "simulation": self.simulation.model_dump(mode="json"),
            "gateway_mode": self.gateway.mode.value,
            "models": {role: self.model_id_for(role) for role in ("selector", "generator", "evaluator")},
        }


_PATH_KEYS = {"root", "rename_map", "index_path", "cassette", "script_template_path", "directory", "script_path"}
_BOOL_WORDS = {"on": True, "off": False, "true": True, "false": False, "yes": True, "no": False}


def _coerce(key: str, value: str, base: Path) -> Any:
    value = value.strip()
    if key in _PATH_KEYS:
        path = Path(value).expanduser()
        return path if path.is_absolute() else (base / path).resolve()
    if value.lower() in _BOOL_WORDS and key in {"ai_eval", "behavioral_repair"}:
        return _BOOL_WORDS[value.lower()]
    return value


def _section(parser: configparser.ConfigParser, name: str, base: Path) -> dict[str, Any]:
    if not parser.has_section(name):
        return {}
    return {key: _coerce(key, value, base) for key, value in parser.items(name)}


def read_sections(path: Path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # type: ignore[assignment, method-assign]
    try:
        with path.open(encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parser


def load_config(path: Path, *, mode: GatewayMode | None = None, cassette: Path | None = None) -> AppConfig:
    """Read and validate a pipeline config file.

    ``mode`` and ``cassette`` override the file's ``[gateway]`` values; the
    CLI passes them through from its flags.
    """
    path = Path(path)
    base = path.resolve().parent
    parser = read_sections(path)

    providers: dict[str, Any] = {}
    for section in parser.sections():
        if section.startswith("provider."):
            name = section.removeprefix("provider.")
            block = _section(parser, section, base)
            if "extra_headers" in block:
                pairs = [item.split(":", 1) for item in str(block["extra_headers"]).split(";") if item.strip()]
                block["extra_headers"] = {k.strip(): v.strip() for k, v in pairs}
            providers[name] = {"name": name, **block}

    gateway = _section(parser, "gateway", base)
    if mode is not None:
        gateway["mode"] = mode
    if cassette is not None:
        gateway["cassette"] = cassette.resolve()

    raw = {
        "library": _section(parser, "library", base),
        "pipeline": _section(parser, "pipeline", base),
        "simulation": _section(parser, "simulation", base),
        "gateway": gateway,
        "providers": providers,
        "toolchain": _section(parser, "toolchain", base),
        "output": _section(parser, "output", base),
    }
    try:
        config = AppConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc

    if config.gateway.mode is GatewayMode.LIVE:
        for role in ("selector", "generator", "evaluator"):
            provider = config.provider_for(role)
            if provider is not None and provider.auth_env_var and not os.getenv(provider.auth_env_var):
                raise ConfigError(f"live mode needs environment variable {provider.auth_env_var} for {provider.name}")
    logger.debug("Loaded config %s (mode=%s)", path, config.gateway.mode)
    return config


def default_config_path() -> Path:
    return data_path("ci.cfg")
