"""Manufactured solutions for the four benchmark geometries.

Each case packages closed-form fields (velocity, pressure, deformation,
multiplier) with their gradients, the affine configuration map, the
coefficient set, and mesh recipes keyed by refinement level.  All
velocities are divergence-free and all pressures have zero mean over
the fluid box; right-hand sides are derived variationally from these
fields by the assembly module.

Level ``l`` uses an ``8 * 2**(l-1)`` pressure grid; the solid mesh
refines in lockstep so the fluid/solid mesh-size ratio stays constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import sici

from .assembly import Parameters
from .mesh import (
    GeometryDescriptor,
    GeometryKind,
    TriMesh,
    build_annulus_mesh,
    build_disk_mesh,
    build_flower_mesh,
    build_structured_square,
    refine_midpoint,
)

_SI1 = float(sici(1.0)[0])  # mean of cos(x*y) over the unit square


def _vec(*components):
    return np.stack(np.broadcast_arrays(*components), axis=-1)


def _tensor(row0, row1):
    return np.stack([_vec(*row0), _vec(*row1)], axis=-2)


@dataclass
class ManufacturedCase:
    """Closed-form solution, map, and mesh recipes for one benchmark."""

    name: str
    fluid_lo: tuple[float, float]
    fluid_hi: tuple[float, float]
    solid_geometry: GeometryDescriptor
    params: Parameters
    u: Callable
    grad_u: Callable
    p_smooth: Callable
    X: Callable
    grad_X: Callable
    lam: Callable
    grad_lam: Callable
    xbar: Callable
    build_solid: Callable[[int], TriMesh]
    p_jump: float = 0.0
    in_solid: Callable | None = None
    shift: float = 0.0
    notes: str = ""

    def fluid_n(self, level: int) -> int:
        if level < 1:
            raise ValueError("refinement levels start at 1")
        return 8 * 2 ** (level - 1)

    def build_fluid(self, level: int) -> tuple[TriMesh, TriMesh]:
        """Coarse pressure mesh and its midpoint refinement for velocity."""
        coarse = build_structured_square(self.fluid_n(level), self.fluid_lo, self.fluid_hi)
        return coarse, refine_midpoint(coarse)

    def fluid_h(self, level: int) -> float:
        box = np.asarray(self.fluid_hi) - np.asarray(self.fluid_lo)
        return float(np.linalg.norm(box / self.fluid_n(level)))


def _box_curl_velocity():
    """curl of (4-x^2)^2 (4-y^2)^2: vanishes on the boundary of [-2,2]^2."""

    def u(x, y):
        return _vec(
            -4.0 * y * (4 - x**2) ** 2 * (4 - y**2),
            4.0 * x * (4 - x**2) * (4 - y**2) ** 2,
        )

    def grad_u(x, y):
        return _tensor(
            (
                16.0 * x * y * (4 - x**2) * (4 - y**2),
                -4.0 * (4 - x**2) ** 2 * (4 - 3 * y**2),
            ),
            (
                4.0 * (4 - y**2) ** 2 * (4 - 3 * x**2),
                -16.0 * x * y * (4 - x**2) * (4 - y**2),
            ),
        )

    return u, grad_u


def _unit_box_velocity():
    """Polynomial divergence-free field vanishing on the unit-square boundary."""

    def u(x, y):
        return _vec(
            2.0 * x**2 * y * (x - 1) ** 2 * (y - 1) * (2 * y - 1),
            -2.0 * x * y**2 * (x - 1) * (2 * x - 1) * (y - 1) ** 2,
        )

    def grad_u(x, y):
        cross = 4.0 * x * y * (x - 1) * (2 * x - 1) * (y - 1) * (2 * y - 1)
        return _tensor(
            (cross, 2.0 * x**2 * (x - 1) ** 2 * (6 * y**2 - 6 * y + 1)),
            (-2.0 * y**2 * (y - 1) ** 2 * (6 * x**2 - 6 * x + 1), -cross),
        )

    return u, grad_u


def _trig_multiplier():
    def lam(s1, s2):
        return _vec(s2 * np.sin(s1), s2 * np.cos(s1))

    def grad_lam(s1, s2):
        return _tensor(
            (s2 * np.cos(s1), np.sin(s1)),
            (-s2 * np.sin(s1), np.cos(s1)),
        )

    return lam, grad_lam


def _exp_multiplier():
    def lam(s1, s2):
        return _vec(np.exp(s1), np.exp(s2))

    def grad_lam(s1, s2):
        zero = np.zeros(np.broadcast(s1, s2).shape)
        return _tensor((np.exp(s1), zero), (zero, np.exp(s2)))

    return lam, grad_lam


def _identity_map(s1, s2):
    return _vec(s1, s2)


def square_case(sigma: float = 0.0) -> ManufacturedCase:
    """Solid square [0,1]^2 mapped onto [-1+sigma,1+sigma]x[-1,1] in [-2,2]^2.

    At sigma = 0 the mapped solid mesh matches the fluid velocity mesh
    exactly; tiny shifts create arbitrarily small cut cells.
    """
    u, grad_u = _box_curl_velocity()
    lam, grad_lam = _exp_multiplier()

    def xbar(s1, s2):
        return _vec(2.0 * s1 - 1.0 + sigma, 2.0 * s2 - 1.0)

    return ManufacturedCase(
        name="square",
        fluid_lo=(-2.0, -2.0),
        fluid_hi=(2.0, 2.0),
        solid_geometry=GeometryDescriptor(
            kind=GeometryKind.SQUARE_CONTAINER_4X4, lo=(0.0, 0.0), hi=(1.0, 1.0)
        ),
        params=Parameters(alpha=0.0, beta=0.0, gamma=1.0, nu=1.0),
        u=u,
        grad_u=grad_u,
        p_smooth=lambda x, y: 150.0 * np.sin(x),
        X=u,
        grad_X=grad_u,
        lam=lam,
        grad_lam=grad_lam,
        xbar=xbar,
        build_solid=lambda level: build_structured_square(8 * 2 ** (level - 1), (0, 0), (1, 1)),
        shift=sigma,
        notes="matching meshes at sigma=0; shift study case",
    )


def disk_case() -> ManufacturedCase:
    """Disk of radius 1/5 at the center of the unit square, identity map.

    The pressure jumps across the interface, so its convergence rate is
    expected to degrade.
    """
    u, grad_u = _unit_box_velocity()
    lam, grad_lam = _trig_multiplier()
    area_solid = np.pi / 25.0
    area_fluid = 1.0 - area_solid
    offset = area_solid / (2.0 * area_fluid)

    def p_smooth(x, y):
        return np.sin(np.pi * x) * np.sin(np.pi * y) - 4.0 / np.pi**2 - offset

    def X(s1, s2):
        return _vec(s1**4 - 2 * s1**3 + s1**2, -2 * s2**3 + 3 * s2**2 - s2)

    def grad_X(s1, s2):
        zero = np.zeros(np.broadcast(s1, s2).shape)
        return _tensor(
            (4 * s1**3 - 6 * s1**2 + 2 * s1, zero),
            (zero, -6 * s2**2 + 6 * s2 - 1),
        )

    return ManufacturedCase(
        name="disk",
        fluid_lo=(0.0, 0.0),
        fluid_hi=(1.0, 1.0),
        solid_geometry=GeometryDescriptor(kind=GeometryKind.DISK, center=(0.5, 0.5), radius=0.2),
        params=Parameters(alpha=0.0, beta=0.0, gamma=1.0, nu=1.0),
        u=u,
        grad_u=grad_u,
        p_smooth=p_smooth,
        X=X,
        grad_X=grad_X,
        lam=lam,
        grad_lam=grad_lam,
        xbar=_identity_map,
        build_solid=lambda level: build_disk_mesh((0.5, 0.5), 0.2, level - 1),
        p_jump=0.5 + offset,
        in_solid=lambda x, y: (x - 0.5) ** 2 + (y - 0.5) ** 2 < 0.04,
        notes="discontinuous pressure across the interface",
    )


def flower_case() -> ManufacturedCase:
    """Flower-shaped solid with inscribed circle of radius 1/4, identity map."""
    lam, grad_lam = _trig_multiplier()

    def u(x, y):
        return _vec(-x * np.sin(x * y), y * np.sin(x * y))

    def grad_u(x, y):
        s, c = np.sin(x * y), np.cos(x * y)
        return _tensor(
            (-s - x * y * c, -(x**2) * c),
            (y**2 * c, s + x * y * c),
        )

    return ManufacturedCase(
        name="flower",
        fluid_lo=(0.0, 0.0),
        fluid_hi=(1.0, 1.0),
        solid_geometry=GeometryDescriptor(
            kind=GeometryKind.FLOWER, center=(0.5, 0.5), radius=0.25, amplitude=0.6, petals=5
        ),
        params=Parameters(alpha=0.0, beta=0.0, gamma=1.0, nu=1.0),
        u=u,
        grad_u=grad_u,
        p_smooth=lambda x, y: np.cos(x * y) - _SI1,
        X=u,
        grad_X=grad_u,
        lam=lam,
        grad_lam=grad_lam,
        xbar=_identity_map,
        build_solid=lambda level: build_flower_mesh((0.5, 0.5), 0.25, 0.6, 5, level - 1),
        notes="velocity has a nonzero boundary trace: Dirichlet data is lifted",
    )


def annulus_case() -> ManufacturedCase:
    """Annulus with radii 1/8 and 1/4, rotated by -45 degrees inside [0,1]^2.

    The map is an isometry (unit deformation-gradient determinant)
    composed with a translation keeping the image strictly inside the
    box; mass terms are active (alpha=100, beta=200) with gamma=0.03.
    """
    u, grad_u = _unit_box_velocity()
    lam, grad_lam = _exp_multiplier()
    c = np.sqrt(2.0) / 2.0

    def xbar(s1, s2):
        return _vec(c * (s1 + s2) - 0.35, c * (-s1 + s2) + 0.5)

    def X(s1, s2):
        arg = s1 * s2
        return _vec(-s1 * np.sin(arg), s2 * np.sin(arg))

    def grad_X(s1, s2):
        arg = s1 * s2
        s, co = np.sin(arg), np.cos(arg)
        return _tensor(
            (-s - s1 * s2 * co, -(s1**2) * co),
            (s2**2 * co, s + s1 * s2 * co),
        )

    return ManufacturedCase(
        name="annulus",
        fluid_lo=(0.0, 0.0),
        fluid_hi=(1.0, 1.0),
        solid_geometry=GeometryDescriptor(
            kind=GeometryKind.ANNULUS, center=(0.5, 0.5), inner_radius=0.125, outer_radius=0.25
        ),
        params=Parameters(alpha=100.0, beta=200.0, gamma=0.03, nu=1.0),
        u=u,
        grad_u=grad_u,
        p_smooth=lambda x, y: x * (x - 1.0) * (y - 1.0) - 1.0 / 12.0,
        X=X,
        grad_X=grad_X,
        lam=lam,
        grad_lam=grad_lam,
        xbar=xbar,
        build_solid=lambda level: build_annulus_mesh((0.5, 0.5), 0.125, 0.25, level - 1),
        notes="rotated annulus; mass terms active",
    )


def registry() -> list[ManufacturedCase]:
    """The four benchmark cases with their default configuration."""
    return [square_case(), disk_case(), flower_case(), annulus_case()]


def get_case(name: str, sigma: float = 0.0) -> ManufacturedCase:
    if name == "square":
        return square_case(sigma)
    if sigma != 0.0:
        raise ValueError("only the square case supports a shift")
    for case in registry():
        if case.name == name:
            return case
    raise ValueError(f"unknown case {name!r}")
