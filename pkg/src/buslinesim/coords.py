"""Conversion from the Dutch Rijksdriehoek grid (RD, AME-7) to WGS-84.

Uses the published power-series approximation anchored at the Amersfoort
datum (RD 155000, 463000 = 52.15517440 N, 5.38720621 E), which is accurate
to well under 1e-4 degrees inside the RD validity window.
"""

from __future__ import annotations

# Series coefficients, arc-seconds per (dx^p * dy^q) with dx, dy in units
# of 100 km from the Amersfoort origin.  Row index is the power of dx,
# column index the power of dy.
_K = (
    (3600 * 52.15517440, 3235.65389, -0.24750, -0.06550, 0.0),
    (-0.00738, -0.00012, 0.0, 0.0, 0.0),
    (-32.58297, -0.84978, -0.01709, -0.00039, 0.0),
    (0.0, 0.0, 0.0, 0.0, 0.0),
    (0.00530, 0.00033, 0.0, 0.0, 0.0),
    (0.0, 0.0, 0.0, 0.0, 0.0),
)
_L = (
    (3600 * 5.38720621, 0.01199, 0.00022, 0.0, 0.0),
    (5260.52916, 105.94684, 2.45656, 0.05594, 0.00128),
    (-0.00022, 0.0, 0.0, 0.0, 0.0),
    (-0.81885, -0.05607, -0.00256, 0.0, 0.0),
    (0.0, 0.0, 0.0, 0.0, 0.0),
    (0.00026, 0.0, 0.0, 0.0, 0.0),
)

RD_X_MIN, RD_X_MAX = 0.0, 300_000.0
RD_Y_MIN, RD_Y_MAX = 300_000.0, 620_000.0


class CoordinateDomainError(ValueError):
    """RD coordinates outside the grid's validity window."""


def rd_to_wgs84(x_rd: float, y_rd: float) -> tuple[float, float]:
    """Convert RD metres to a WGS-84 (latitude, longitude) pair in degrees.

    Raises CoordinateDomainError when (x_rd, y_rd) falls outside
    x in [0, 300000], y in [300000, 620000].
    """
    if not (RD_X_MIN <= x_rd <= RD_X_MAX and RD_Y_MIN <= y_rd <= RD_Y_MAX):
        raise CoordinateDomainError(
            f"RD point ({x_rd}, {y_rd}) outside validity window "
            f"x in [{RD_X_MIN:.0f}, {RD_X_MAX:.0f}], y in [{RD_Y_MIN:.0f}, {RD_Y_MAX:.0f}]"
        )
    dx = (x_rd - 155_000.0) / 100_000.0
    dy = (y_rd - 463_000.0) / 100_000.0
    lat_sec = 0.0
    lon_sec = 0.0
    px = 1.0
    for p in range(6):
        py = 1.0
        for q in range(5):
            lat_sec += _K[p][q] * px * py
            lon_sec += _L[p][q] * px * py
            py *= dy
        px *= dx
    return lat_sec / 3600.0, lon_sec / 3600.0
