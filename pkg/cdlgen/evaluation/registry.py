from __future__ import annotations

from collections.abc import Callable
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from cdlgen.evaluation.oracles import ConformanceOracle
    from cdlgen.services.tasks import ReferenceTask

OracleFactory = Callable[["ReferenceTask", dict[str, Any]], "ConformanceOracle"]

_REGISTRY: dict[str, OracleFactory] = {}


def register_oracle(oracle_id: str) -> Callable[[OracleFactory], OracleFactory]:
    def decorator(factory: OracleFactory) -> OracleFactory:
        _REGISTRY[oracle_id] = factory
        return factory

    return decorator


def create_oracle(oracle_id: str, task: ReferenceTask, options: dict[str, Any] | None = None) -> ConformanceOracle:
    load_builtin_oracles()
    if oracle_id not in _REGISTRY:
        available = ", ".join(sorted(_REGISTRY))
        msg = f"Unknown oracle {oracle_id!r}. Available: {available}"
        raise KeyError(msg)
    return _REGISTRY[oracle_id](task, options or {})


def available_oracles() -> list[str]:
    load_builtin_oracles()
    return sorted(_REGISTRY)


def load_builtin_oracles() -> None:
    """Import modules for their registration side effects."""
    from cdlgen.evaluation import oracles as _oracles  # noqa: F401, PLC0415
