"""Straight race track and its curvilinear (Frenet) frame.

The reference line is the track centerline, aligned with the world x-axis.
Longitudinal progress ``s`` runs along it, the lateral offset ``n`` along
the normal. Reference heading and curvature are kept in the interfaces for
generality but are identically zero here.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TrackModel:
    """Immutable straight track, shareable across parallel episodes.

    Parameters
    ----------
    length : total track length [m].
    half_width_left : distance from reference line to left boundary [m].
    half_width_right : distance from reference line to right boundary [m].
    """

    length: float = 1500.0
    half_width_left: float = 7.5
    half_width_right: float = 7.5

    def __post_init__(self) -> None:
        if self.length <= 0.0:
            raise ValueError("track length must be positive")
        if self.half_width_left <= 0.0 or self.half_width_right <= 0.0:
            raise ValueError("track half-widths must be positive")

    def reference_heading(self, s: float) -> float:
        """Heading of the reference line at arc length ``s`` [rad]."""
        return 0.0

    def reference_curvature(self, s: float) -> float:
        """Curvature of the reference line at arc length ``s`` [1/m]."""
        return 0.0

    def to_cartesian(self, s, n):
        """Map curvilinear ``(s, n)`` to world ``(x, y)``.

        For the straight track with the reference line on the x-axis this
        is the identity; accepts scalars or arrays.
        """
        return s, n

    def within_bounds(self, n: float, margin: float = 0.0) -> bool:
        """True iff ``n`` lies inside the track, inset by ``margin`` per side."""
        if margin < 0.0:
            raise ValueError("margin must be non-negative")
        return -self.half_width_right + margin <= n <= self.half_width_left - margin

    def lateral_limits(self, margin: float = 0.0) -> tuple[float, float]:
        """Drivable lateral interval ``(n_min, n_max)`` inset by ``margin``."""
        return -self.half_width_right + margin, self.half_width_left - margin
