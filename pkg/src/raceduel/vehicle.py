"""Shared vehicle footprint geometry."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class VehicleGeometry:
    """Rectangular footprint used for collision checks and bound margins.

    Both vehicles share the same geometry. The footprint is centered at
    the vehicle's reference position and oriented by its heading.
    """

    width: float = 1.93
    length: float = 4.9

    def __post_init__(self) -> None:
        if self.width <= 0.0 or self.length <= 0.0:
            raise ValueError("vehicle dimensions must be positive")

    @property
    def half_width(self) -> float:
        return 0.5 * self.width
