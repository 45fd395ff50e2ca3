"""Compiled inner loops for the candidate sweep.

The jitted scan mirrors the numpy feasibility expressions operation for
operation (no fastmath), so both routes produce identical booleans and
speeds; it exists purely to avoid the temporary-array traffic of
(n_velocity, n_lateral, n_points) broadcasting in the per-step replan.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _interp(x: float, xs, ys) -> float:
    # mirrors np.interp: clamp outside the table, exact at knots
    if x <= xs[0]:
        return ys[0]
    if x >= xs[-1]:
        return ys[-1]
    j = np.searchsorted(xs, x, side="right") - 1
    slope = (ys[j + 1] - ys[j]) / (xs[j + 1] - xs[j])
    return slope * (x - xs[j]) + ys[j]


@njit(cache=True)
def candidate_scan(
    s_dot, s_ddot, n, n_dot, n_ddot,
    lo: float, hi: float, kappa_max: float, eps: float,
    gg_speeds, gg_a_lon, gg_a_lat,
):
    n_vel, m = s_dot.shape
    n_lat = n.shape[0]
    feasible = np.empty((n_vel, n_lat), dtype=np.bool_)
    speed = np.zeros((n_vel, n_lat, m))

    lat_ok = np.empty(n_lat, dtype=np.bool_)
    for j in range(n_lat):
        ok = True
        for k in range(m):
            if n[j, k] < lo or n[j, k] > hi:
                ok = False
                break
        lat_ok[j] = ok

    forward_ok = np.empty(n_vel, dtype=np.bool_)
    for i in range(n_vel):
        ok = True
        for k in range(m):
            if s_dot[i, k] < 0.0:
                ok = False
                break
        forward_ok[i] = ok

    constant_gg = gg_speeds.size == 2 and (
        gg_a_lon[0] == gg_a_lon[1] and gg_a_lat[0] == gg_a_lat[1]
    )
    lim_lon_const = gg_a_lon[0]
    lim_lat_const = gg_a_lat[0]

    for i in range(n_vel):
        for j in range(n_lat):
            if not (forward_ok[i] and lat_ok[j]):
                feasible[i, j] = False
                continue
            ok = True
            for k in range(m):
                sd = s_dot[i, k]
                sdd = s_ddot[i, k]
                nd = n_dot[j, k]
                ndd = n_ddot[j, k]
                v = math.sqrt(sd * sd + nd * nd)
                speed[i, j, k] = v
                if v > eps:
                    num_kappa = sd * ndd - nd * sdd
                    curvature = num_kappa / (v * v * v)
                    if abs(curvature) > kappa_max:
                        ok = False
                        break
                    a_lon = (sd * sdd + nd * ndd) / v
                    a_lat = v * v * curvature
                else:
                    a_lon = 0.0
                    a_lat = 0.0
                if constant_gg:
                    lim_lon = lim_lon_const
                    lim_lat = lim_lat_const
                else:
                    lim_lon = _interp(v, gg_speeds, gg_a_lon)
                    lim_lat = _interp(v, gg_speeds, gg_a_lat)
                if a_lon == 0.0:
                    term_lon = 0.0
                elif lim_lon > 0.0:
                    term_lon = (a_lon / lim_lon) ** 2
                else:
                    term_lon = np.inf
                if a_lat == 0.0:
                    term_lat = 0.0
                elif lim_lat > 0.0:
                    term_lat = (a_lat / lim_lat) ** 2
                else:
                    term_lat = np.inf
                if term_lon + term_lat - 1.0 > 0.0:
                    ok = False
                    break
            feasible[i, j] = ok
            if not ok:
                for k in range(m):
                    speed[i, j, k] = 0.0
    return feasible, speed
