"""
Ramp registry — unit coupling profiles addressed by a shape tag.

A ramp profile φ maps the rescaled time u = t/τ ∈ [0, 1] of the rising half-cycle
to φ(u) ∈ [0, 1] with φ(0) = 0 and φ(1) = 1; the falling half mirrors it.
Profiles must accept numpy arrays.

Usage (decorator style):
    @register_ramp("linear")
    def linear(u): return u

Usage (programmatic):
    registry = RampRegistry()
    registry.register(profile, name="smoothstep")
    registry.get("smoothstep")
"""

from __future__ import annotations

from typing import Callable, Dict, List, Optional

import numpy as np

from critcycle.errors import InvalidParameterError
from critcycle.observability.logger import get_logger

logger = get_logger(__name__)

RampProfile = Callable[[np.ndarray], np.ndarray]

# Module-level default registry (used by the @register_ramp decorator)
_default_registry: Optional["RampRegistry"] = None


def get_default_registry() -> "RampRegistry":
    global _default_registry
    if _default_registry is None:
        _default_registry = RampRegistry()
    return _default_registry


def register_ramp(name: str) -> Callable[[RampProfile], RampProfile]:
    """Decorator registering a profile in the default RampRegistry under *name*."""

    def decorator(fn: RampProfile) -> RampProfile:
        get_default_registry().register(fn, name=name)
        return fn

    return decorator


class RampRegistry:
    """Holds a mapping of ramp tag → unit profile."""

    def __init__(self) -> None:
        self._ramps: Dict[str, RampProfile] = {}

    def register(self, fn: RampProfile, name: Optional[str] = None) -> None:
        """Register *fn* under *name* (defaults to fn.__name__) after checking its endpoints."""
        ramp_name = name or fn.__name__
        ends = np.asarray(fn(np.array([0.0, 1.0])), dtype=float)
        if not np.allclose(ends, [0.0, 1.0], atol=1e-12):
            raise InvalidParameterError(f"Ramp '{ramp_name}' must satisfy phi(0)=0 and phi(1)=1, got {ends.tolist()}")
        self._ramps[ramp_name] = fn
        logger.debug("ramp_registered", name=ramp_name)

    def get(self, name: str) -> RampProfile:
        if name not in self._ramps:
            raise InvalidParameterError(f"Ramp '{name}' not found in registry. Registered: {list(self._ramps)}")
        return self._ramps[name]

    def names(self) -> List[str]:
        return list(self._ramps)

    def __contains__(self, name: object) -> bool:
        return name in self._ramps


@register_ramp("linear")
def linear(u: np.ndarray) -> np.ndarray:
    return np.asarray(u, dtype=float)
