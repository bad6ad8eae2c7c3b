"""Body-fixed channel geometry and quadrature meshes.

The fluid domain is the truncated 2D channel [-L, L] x (-1, 1) minus a
rectangular body held at rest in the body-fixed frame.  All assembled fields
are compactly supported in |x1| < X0 + 1, so the truncation at |x1| = L is
lossless for every integral the solver needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, MeshError

MIN_CELLS_ACROSS_BODY = 8


@dataclass(frozen=True)
class PhysicalParams:
    """Fluid density/viscosity and oscillator mass/stiffness."""

    rho: float = 1.0
    mu: float = 1.0
    mass: float = 1.0
    stiffness: float = 1.0

    def __post_init__(self):
        for name in ("rho", "mu", "mass", "stiffness"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite real, got {v!r}")

    @property
    def nu(self):
        return self.mu / self.rho

    @property
    def natural_period(self):
        return 2.0 * math.pi * math.sqrt(self.mass / self.stiffness)


@dataclass(frozen=True)
class ChannelGeometry:
    half_length: float
    body: tuple  # (bx0, bx1, by0, by1)
    X0: float = field(init=False)
    wall_margin: float = field(init=False)

    def __post_init__(self):
        bx0, bx1, by0, by1 = self.body
        diam = math.hypot(bx1 - bx0, by1 - by0)
        object.__setattr__(self, "X0", diam + 1.0)
        object.__setattr__(self, "wall_margin", min(by0 - (-1.0), 1.0 - by1))

    @property
    def body_width(self):
        return self.body[1] - self.body[0]

    @property
    def body_height(self):
        return self.body[3] - self.body[2]

    @property
    def body_area(self):
        return self.body_width * self.body_height

    @property
    def body_perimeter(self):
        return 2.0 * (self.body_width + self.body_height)

    @property
    def body_center(self):
        bx0, bx1, by0, by1 = self.body
        return (0.5 * (bx0 + bx1), 0.5 * (by0 + by1))

    @property
    def fluid_area(self):
        return 4.0 * self.half_length - self.body_area

    def contains_body(self, x1, x2):
        bx0, bx1, by0, by1 = self.body
        return (x1 >= bx0) & (x1 <= bx1) & (x2 >= by0) & (x2 <= by1)

    def dist_inf_to_body(self, x1, x2):
        bx0, bx1, by0, by1 = self.body
        dx = np.maximum(np.maximum(bx0 - x1, x1 - bx1), 0.0)
        dy = np.maximum(np.maximum(by0 - x2, x2 - by1), 0.0)
        return np.maximum(dx, dy)


def build_geometry(half_length, body):
    """Validate and build the channel-with-body geometry.

    `body` is (bx0, bx1, by0, by1), an axis-aligned rectangle strictly inside
    the channel and away from the walls.
    """
    bx0, bx1, by0, by1 = (float(v) for v in body)
    if not (bx0 < bx1 and by0 < by1):
        raise GeometryError(f"degenerate body rectangle {body}")
    if not (by0 > -1.0 and by1 < 1.0):
        raise GeometryError(
            f"body must stay strictly between the channel walls, got x2 in [{by0}, {by1}]"
        )
    geom = ChannelGeometry(float(half_length), (bx0, bx1, by0, by1))
    if not (bx0 > -geom.X0 + 1.0 and bx1 < geom.X0 - 1.0):
        raise GeometryError(
            f"body x1-extent [{bx0}, {bx1}] too wide for the near zone "
            f"(must sit inside ({-geom.X0 + 1.0:.3f}, {geom.X0 - 1.0:.3f}))"
        )
    if geom.half_length < geom.X0 + 2.0:
        raise GeometryError(
            f"half_length {geom.half_length} too small: need at least X0 + 2 = "
            f"{geom.X0 + 2.0:.4f} to leave room for the exit zones"
        )
    return geom


@dataclass(frozen=True)
class QuadratureMesh:
    h: float
    centers: np.ndarray  # (ncells, 2), fluid-area centroids for cut cells
    weights: np.ndarray  # (ncells,)
    boundary_nodes: np.ndarray  # (nb, 2) on the body boundary
    boundary_normals: np.ndarray  # (nb, 2), outward from body into fluid
    boundary_weights: np.ndarray  # (nb,)
    geometry: ChannelGeometry

    @property
    def n_cells(self):
        return len(self.weights)

    def subset(self, mask):
        """Indices of cells whose centroid satisfies the boolean mask array."""
        return np.nonzero(mask)[0]

    def cells_within(self, x1_abs_max):
        return np.nonzero(np.abs(self.centers[:, 0]) < x1_abs_max)[0]

    def area(self):
        return float(self.weights.sum())

    def boundary_integral(self, values):
        """Integral over the body boundary of per-node values (scalar/vector)."""
        values = np.asarray(values)
        return np.tensordot(self.boundary_weights, values, axes=(0, 0))


def _side_quadrature(p0, p1, normal, h):
    """Midpoint nodes along the segment p0->p1 with spacing <= h."""
    length = math.hypot(p1[0] - p0[0], p1[1] - p0[1])
    nseg = max(1, int(math.ceil(length / h)))
    s = (np.arange(nseg) + 0.5) / nseg
    nodes = np.outer(1.0 - s, p0) + np.outer(s, p1)
    normals = np.tile(normal, (nseg, 1)).astype(float)
    weights = np.full(nseg, length / nseg)
    return nodes, normals, weights


def build_mesh(geom, h):
    """Uniform cell-centered quadrature with body cut cells clipped exactly.

    Cells fully inside the body are dropped; partially covered cells keep the
    fluid part of their area with the centroid of that part.  Body-boundary
    quadrature uses midpoint nodes on each side with axis-aligned normals.
    """
    h = float(h)
    if h <= 0:
        raise MeshError(f"cell size must be positive, got {h}")
    bx0, bx1, by0, by1 = geom.body
    if min(geom.body_width, geom.body_height) / h < MIN_CELLS_ACROSS_BODY:
        raise MeshError(
            f"h={h} too coarse: need >= {MIN_CELLS_ACROSS_BODY} cells across "
            f"each body side ({geom.body_width} x {geom.body_height})"
        )
    L = geom.half_length
    nx = int(round(2.0 * L / h))
    ny = int(round(2.0 / h))
    xe = np.linspace(-L, L, nx + 1)
    ye = np.linspace(-1.0, 1.0, ny + 1)
    hx = xe[1] - xe[0]
    hy = ye[1] - ye[0]

    X0e, X1e = np.meshgrid(xe[:-1], ye[:-1], indexing="ij")
    X0e = X0e.ravel()
    Y0e = X1e.ravel()
    X1c = X0e + hx
    Y1c = Y0e + hy

    # overlap of each cell with the body rectangle
    ox = np.clip(np.minimum(X1c, bx1) - np.maximum(X0e, bx0), 0.0, None)
    oy = np.clip(np.minimum(Y1c, by1) - np.maximum(Y0e, by0), 0.0, None)
    a_int = ox * oy
    a_cell = hx * hy
    a_fluid = a_cell - a_int
    keep = a_fluid > 1e-14 * a_cell

    cx_cell = X0e + 0.5 * hx
    cy_cell = Y0e + 0.5 * hy
    # centroid of the body-overlap rectangle
    icx = 0.5 * (np.maximum(X0e, bx0) + np.minimum(X1c, bx1))
    icy = 0.5 * (np.maximum(Y0e, by0) + np.minimum(Y1c, by1))
    with np.errstate(invalid="ignore", divide="ignore"):
        cx = np.where(a_int > 0, (a_cell * cx_cell - a_int * icx) / np.maximum(a_fluid, 1e-300), cx_cell)
        cy = np.where(a_int > 0, (a_cell * cy_cell - a_int * icy) / np.maximum(a_fluid, 1e-300), cy_cell)

    centers = np.column_stack([cx[keep], cy[keep]])
    weights = a_fluid[keep]

    sides = [
        ((bx0, by0), (bx1, by0), (0.0, -1.0)),
        ((bx1, by0), (bx1, by1), (1.0, 0.0)),
        ((bx1, by1), (bx0, by1), (0.0, 1.0)),
        ((bx0, by1), (bx0, by0), (-1.0, 0.0)),
    ]
    nodes, normals, bweights = [], [], []
    for p0, p1, nrm in sides:
        nd, nm, w = _side_quadrature(p0, p1, nrm, h)
        nodes.append(nd)
        normals.append(nm)
        bweights.append(w)

    mesh = QuadratureMesh(
        h=h,
        centers=centers,
        weights=weights,
        boundary_nodes=np.vstack(nodes),
        boundary_normals=np.vstack(normals),
        boundary_weights=np.concatenate(bweights),
        geometry=geom,
    )
    area_err = abs(mesh.area() - geom.fluid_area) / geom.fluid_area
    if area_err > 1e-10:
        raise MeshError(f"mesh area inconsistent with geometry (relative error {area_err:.2e})")
    return mesh
