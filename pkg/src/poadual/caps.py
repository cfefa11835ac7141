from __future__ import annotations

from dataclasses import dataclass, asdict

from .errors import CapExceeded


@dataclass(frozen=True)
class Caps:
    """Enumeration limits. These are configuration, never hard-coded checks."""

    players: int = 6
    strategies: int = 6
    profiles: int = 4096
    resources: int = 10
    configurations: int = 20000
    grid_points: int = 200000
    bayes_strategy_maps: int = 200000

    def check(self, dimension: str, size: int) -> None:
        cap = getattr(self, dimension)
        if size > cap:
            raise CapExceeded(dimension, size, cap)

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT_CAPS = Caps()
