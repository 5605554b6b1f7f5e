from __future__ import annotations

from collections.abc import Callable

from cdlgen.exceptions import UnknownBehavior
from cdlgen.simulation.behaviors.base import Behavior

BehaviorClass = type[Behavior]

_REGISTRY: dict[str, BehaviorClass] = {}


def register_behavior(fqn: str) -> Callable[[BehaviorClass], BehaviorClass]:
    def decorator(cls: BehaviorClass) -> BehaviorClass:
        cls.fqn = fqn
        _REGISTRY[fqn] = cls
        return cls

    return decorator


def behavior_class(fqn: str) -> BehaviorClass:
    load_builtin_behaviors()
    try:
        return _REGISTRY[fqn]
    except KeyError:
        raise UnknownBehavior(fqn) from None


def has_behavior(fqn: str) -> bool:
    load_builtin_behaviors()
    return fqn in _REGISTRY


def available_behaviors() -> list[str]:
    load_builtin_behaviors()
    return sorted(_REGISTRY)


def load_builtin_behaviors() -> None:
    """Import modules for their registration side effects."""
    from cdlgen.simulation.behaviors import controllers as _controllers  # noqa: F401, PLC0415
    from cdlgen.simulation.behaviors import conversions as _conversions  # noqa: F401, PLC0415
    from cdlgen.simulation.behaviors import integers as _integers  # noqa: F401, PLC0415
    from cdlgen.simulation.behaviors import logical as _logical  # noqa: F401, PLC0415
    from cdlgen.simulation.behaviors import reals as _reals  # noqa: F401, PLC0415
