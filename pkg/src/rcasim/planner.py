"""Coupler movement planning.

Targets are assigned per RCA by minimum total travel distance. Couplers then
move along straight lines at constant speed; a coupler that would come
closer than d_min to another port is held at its start for extra time
slots until its path is clear. Lower-index couplers have priority.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DomainError, PlanningError

MAX_DELAY_STEPS = 100


@dataclass
class MovePlan:
    """Assignment and timed waypoints of a coupler reconfiguration.

    ``assignment[c]`` is the target index of initial coupler ``c``;
    ``waypoints[c]`` is a list of ``(time_s, xyz)`` tuples;
    ``delays[c]`` is how long coupler ``c`` waits before leaving.
    """

    assignment: np.ndarray
    waypoints: list
    makespan: float
    total_distance: float
    delays: np.ndarray
    speed: float

    @property
    def energy(self):
        """Movement energy in units of travelled meters."""
        return self.total_distance

    def positions_at(self, t):
        """Positions of all couplers at time ``t``, shape (C, 3)."""
        out = []
        for wps in self.waypoints:
            times = np.array([w[0] for w in wps])
            pts = np.array([w[1] for w in wps])
            out.append([np.interp(t, times, pts[:, k]) for k in range(3)])
        return np.array(out).reshape(-1, 3)


def assign_targets(initial, target):
    """Per-RCA minimum-total-distance matching of initial to target couplers.

    Returns ``(assignment, total_distance)``.
    """
    if initial.n_couplers != target.n_couplers:
        raise DomainError("initial and target layouts have different coupler counts")
    assignment = np.arange(initial.n_couplers)
    total = 0.0
    for owner in np.unique(initial.coupler_owner):
        src = np.flatnonzero(initial.coupler_owner == owner)
        dst = np.flatnonzero(target.coupler_owner == owner)
        if len(src) != len(dst):
            raise DomainError(f"RCA {owner} has {len(src)} initial and {len(dst)} target couplers")
        cost = np.linalg.norm(initial.coupler_positions[src][:, None]
                              - target.coupler_positions[dst][None], axis=-1)
        rows, cols = linear_sum_assignment(cost)
        assignment[src[rows]] = dst[cols]
        total += float(cost[rows, cols].sum())
    if set(np.unique(target.coupler_owner)) - set(np.unique(initial.coupler_owner)):
        raise DomainError("target layout has couplers for an RCA absent from the initial layout")
    return assignment, total


def _segment_min_distance(p0, v0, p1, v1, t0, t1):
    """Minimum distance over [t0, t1] between two points moving linearly.

    ``p`` is the position at ``t0`` and ``v`` the velocity.
    """
    dp = p0 - p1
    dv = v0 - v1
    a = float(dv @ dv)
    s = 0.0 if a == 0 else float(np.clip(-(dp @ dv) / a, 0.0, t1 - t0))
    return float(np.linalg.norm(dp + s * dv))


class _Track:
    def __init__(self, start, end, speed, delay):
        self.start, self.end = start, end
        self.dist = float(np.linalg.norm(end - start))
        self.delay = delay
        self.duration = self.dist / speed
        self.vel = (end - start) / self.duration if self.duration > 0 else np.zeros(3)

    @property
    def arrival(self):
        return self.delay + self.duration

    def at(self, t):
        if t <= self.delay:
            return self.start
        if t >= self.arrival:
            return self.end
        return self.start + (t - self.delay) * self.vel

    def velocity(self, t0, t1):
        """Velocity on [t0, t1], which must not straddle a breakpoint."""
        mid = 0.5 * (t0 + t1)
        return self.vel if self.delay < mid < self.arrival else np.zeros(3)


def _min_separation(a, b, times):
    """Exact minimum distance between two tracks (b may be a fixed point)."""
    best = np.inf
    for t0, t1 in zip(times[:-1], times[1:]):
        pa, va = a.at(t0), a.velocity(t0, t1)
        if isinstance(b, _Track):
            pb, vb = b.at(t0), b.velocity(t0, t1)
        else:
            pb, vb = b, np.zeros(3)
        best = min(best, _segment_min_distance(pa, va, pb, vb, t0, t1))
    return best


def _time_grid(tracks, dt):
    end = max([t.arrival for t in tracks] + [0.0])
    n = max(int(np.ceil(end / dt)), 1)
    pts = set(np.linspace(0.0, end, n + 1).tolist())
    for t in tracks:
        pts.update((t.delay, t.arrival))
    return np.array(sorted(p for p in pts if 0.0 <= p <= end))


def plan_trajectories(assignment, initial, target, speed, wavelength=None, d_min=None):
    """Straight-line, constant-speed schedule with delay-based deconfliction.

    Time is discretized so no coupler moves more than ``wavelength / 20``
    per slot; within each slot separations are evaluated exactly.
    """
    if not speed > 0:
        raise DomainError("speed must be positive")
    d_min = initial.d_min if d_min is None else d_min
    if wavelength is None:
        wavelength = 20.0 * max(d_min, 1e-12)
    dt = wavelength / 20.0 / speed
    step = d_min / speed if d_min > 0 else dt
    starts = initial.coupler_positions
    ends = target.coupler_positions[np.asarray(assignment)]
    actives = initial.active_positions
    tracks = []
    for c in range(len(starts)):
        track = _Track(starts[c], ends[c], speed, 0.0)
        for _ in range(MAX_DELAY_STEPS + 1):
            times = _time_grid(tracks + [track], dt)
            clear = all(_min_separation(track, a, times) >= d_min - 1e-12 for a in actives)
            clear = clear and all(_min_separation(track, o, times) >= d_min - 1e-12 for o in tracks)
            if clear:
                break
            track = _Track(starts[c], ends[c], speed, track.delay + step)
        else:
            raise PlanningError(
                f"coupler {c} still conflicts after {MAX_DELAY_STEPS} delay increments")
        tracks.append(track)
    waypoints = []
    for tr in tracks:
        wps = [(0.0, tr.start.copy())]
        if tr.delay > 0:
            wps.append((tr.delay, tr.start.copy()))
        if tr.duration > 0:
            wps.append((tr.arrival, tr.end.copy()))
        waypoints.append(wps)
    makespan = max([t.arrival for t in tracks] + [0.0])
    return MovePlan(np.asarray(assignment), waypoints, makespan,
                    float(sum(t.dist for t in tracks)),
                    np.array([t.delay for t in tracks]), float(speed))


def verify_plan(plan, initial, resolution):
    """Smallest port separation seen when sampling ``plan`` every ``resolution`` meters of travel."""
    dt = resolution / plan.speed
    n = max(int(np.ceil(plan.makespan / dt)), 1)
    worst = np.inf
    actives = initial.active_positions
    for t in np.linspace(0.0, plan.makespan, n + 1):
        pos = plan.positions_at(t)
        pts = np.vstack([actives, pos])
        d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
        m = len(actives)
        d[:m, :m] = np.inf
        np.fill_diagonal(d, np.inf)
        worst = min(worst, float(d.min()))
    return worst
