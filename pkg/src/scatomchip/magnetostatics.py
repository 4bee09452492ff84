"""Static magnetic fields of wire segments, circular loops and uniform bias fields.

Coordinates follow the chip frame: z is normal to the chip surface and x runs
along the central bar of the Z-wire (the trap's axial direction).  Positions
are metres, fields tesla, currents ampere.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from . import kernels
from .constants import MU_0, SINGULAR_GUARD
from .errors import SimulationError


class SingularPointError(SimulationError):
    """An evaluation point lies on a current filament."""

    def __init__(self, kind, source_index, point_index, point):
        self.kind = kind
        self.source_index = source_index
        self.point_index = point_index
        self.point = tuple(float(c) for c in point)
        super().__init__(
            f"evaluation point {self.point} (index {point_index}) lies on "
            f"{kind} #{source_index}"
        )


def _ftuple(v) -> tuple:
    return tuple(float(x) for x in vec3(v))


def vec3(v) -> np.ndarray:
    """Return ``v`` as a finite float array of shape (3,)."""
    a = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite vector component in {v!r}")
    return a


@dataclass(frozen=True)
class WireSegment:
    start: tuple
    end: tuple
    current: float

    def __post_init__(self):
        s, e = vec3(self.start), vec3(self.end)
        if np.linalg.norm(e - s) <= 0.0:
            raise ValueError("wire segment has zero length")
        object.__setattr__(self, "start", _ftuple(s))
        object.__setattr__(self, "end", _ftuple(e))
        object.__setattr__(self, "current", float(self.current))

    def row(self):
        return (*self.start, *self.end, self.current)


@dataclass(frozen=True)
class CurrentLoop:
    """Circular filament; positive current circulates right-handedly about ``normal``."""

    center: tuple
    radius: float
    normal: tuple = (0.0, 0.0, 1.0)
    current: float = 0.0

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError("loop radius must be positive")
        n = vec3(self.normal)
        norm = np.linalg.norm(n)
        if norm == 0.0:
            raise ValueError("loop normal must be nonzero")
        if abs(norm - 1.0) > 1e-12:
            n = n / norm
        object.__setattr__(self, "center", _ftuple(self.center))
        object.__setattr__(self, "normal", _ftuple(n))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "current", float(self.current))

    def row(self):
        return (*self.center, *self.normal, self.radius, self.current)

    def with_current(self, current: float) -> "CurrentLoop":
        return CurrentLoop(self.center, self.radius, self.normal, current)


@dataclass(frozen=True)
class ChipGeometry:
    """Complete source set: wire segments, current loops and a uniform bias."""

    segments: tuple = ()
    loops: tuple = ()
    bias: tuple = (0.0, 0.0, 0.0)
    _seg_arr: np.ndarray = field(init=False, repr=False, compare=False)
    _loop_arr: np.ndarray = field(init=False, repr=False, compare=False)
    _bias_arr: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "loops", tuple(self.loops))
        object.__setattr__(self, "bias", _ftuple(self.bias))
        seg = np.array([s.row() for s in self.segments], dtype=float).reshape(-1, 7)
        loop = np.array([lp.row() for lp in self.loops], dtype=float).reshape(-1, 8)
        object.__setattr__(self, "_seg_arr", np.ascontiguousarray(seg))
        object.__setattr__(self, "_loop_arr", np.ascontiguousarray(loop))
        object.__setattr__(self, "_bias_arr", np.ascontiguousarray(self.bias, dtype=float))

    def __add__(self, other: "ChipGeometry") -> "ChipGeometry":
        return ChipGeometry(
            self.segments + other.segments,
            self.loops + other.loops,
            tuple(np.add(self.bias, other.bias)),
        )

    def scaled(self, factor: float) -> "ChipGeometry":
        """Every current and the bias multiplied by ``factor``."""
        return ChipGeometry(
            tuple(WireSegment(s.start, s.end, s.current * factor) for s in self.segments),
            tuple(lp.with_current(lp.current * factor) for lp in self.loops),
            tuple(np.multiply(self.bias, factor)),
        )

    def with_bias(self, bias) -> "ChipGeometry":
        return ChipGeometry(self.segments, self.loops, bias)

    def with_loops(self, *loops: CurrentLoop) -> "ChipGeometry":
        """Copy with ``loops`` appended."""
        return ChipGeometry(self.segments, self.loops + tuple(loops), self.bias)

    def field_many(self, points) -> np.ndarray:
        """Field at an (n, 3) array of points."""
        pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 3))
        out = np.empty_like(pts)
        info = np.zeros(3, dtype=np.int_)
        status = kernels.field_points(
            pts, self._seg_arr, self._loop_arr, self._bias_arr,
            SINGULAR_GUARD, MU_0, out, info,
        )
        if status:
            kind = "wire segment" if info[0] == 1 else "current loop"
            raise SingularPointError(kind, int(info[1]), int(info[2]), pts[info[2]])
        return out

    def field(self, p) -> np.ndarray:
        return self.field_many(p)[0]

    def field_magnitude(self, points) -> np.ndarray:
        return np.linalg.norm(self.field_many(points), axis=1)


def segment_field(seg: WireSegment, p) -> np.ndarray:
    return ChipGeometry(segments=(seg,)).field(vec3(p))


def loop_field(loop: CurrentLoop, p) -> np.ndarray:
    return ChipGeometry(loops=(loop,)).field(vec3(p))


def total_field(g: ChipGeometry, p) -> np.ndarray:
    return g.field(vec3(p))


_UNIT = np.eye(3)


def field_jacobian(g: ChipGeometry, p, h: float = 1e-8) -> np.ndarray:
    """Central-difference Jacobian ``J[i, j] = dB_i/dx_j`` in T/m."""
    if not h > 0.0:
        raise ValueError("finite-difference step h must be positive")
    p = vec3(p)
    pts = np.concatenate([p + h * _UNIT, p - h * _UNIT])
    B = g.field_many(pts)
    return ((B[:3] - B[3:]) / (2.0 * h)).T


def z_wire(bar_length=5e-3, lead_length=2e-3, current=5.0, height=0.0) -> tuple:
    """Segments of a Z-shaped wire in the plane z = ``height``.

    The central bar runs along +x centred on the origin; the leads attach at
    opposite ends and run along -y (left) and +y (right), so both carry
    current in +y and their fields add along x at the trap.
    """
    half = 0.5 * bar_length
    a = (-half, -lead_length, height)
    b = (-half, 0.0, height)
    c = (half, 0.0, height)
    d = (half, lead_length, height)
    return (
        WireSegment(a, b, current),
        WireSegment(b, c, current),
        WireSegment(c, d, current),
    )


def z_trap_geometry(bar_length=5e-3, lead_length=2e-3, current=5.0,
                    bias_y=2e-3, bias_x=1e-4, bias_z=0.0) -> ChipGeometry:
    return ChipGeometry(z_wire(bar_length, lead_length, current), (), (bias_x, bias_y, bias_z))


def infinite_wire_height(current: float, bias: float) -> float:
    """Height where an infinite wire's field cancels a transverse bias."""
    return MU_0 * abs(current) / (2.0 * math.pi * abs(bias))
