"""Flux carrier: divergence-free extension of the channel profile past the body.

The carrier velocity is the curl of the stream function

    Psi(x, t) = S(x2, t) + (c(t) - S(x2, t)) * theta(x),

where S(x2, t) is the x2-antiderivative of the profile chi, theta is a C^3
plateau cutoff equal to 1 near the body and 0 at distance >= `outer`, and
c(t) = S at the body's vertical center.  By construction

  * div V = 0 identically,
  * V = 0 on the body boundary (Psi is constant there),
  * V = chi e1 wherever theta vanishes, in particular for |x1| >= X0
    and on the channel walls,
  * the flux through any section equals the prescribed flow rate.

The remaining forcing after subtracting the carrier is

    f = (mu/rho) Lap V - V.grad V - dV/dt + psi(t) e1 (+ external body force),
    g = rho * psi(t) * area(B) (+ external mass force),

with f supported inside the cutoff region: away from it V solves the
channel-profile equations exactly, so the terms cancel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ._bumps import EdgeBump
from .errors import GeometryError
from .signals import PeriodicSignal
from .womersley import PoiseuilleFlow


@dataclass(frozen=True)
class CutoffParams:
    """Plateau cutoff radii (sup-distance to the body rectangle)."""

    inner: float = 0.2
    outer: float = 0.9

    def __post_init__(self):
        if not (0.0 < self.inner < self.outer):
            raise ValueError(f"need 0 < inner < outer, got {self.inner}, {self.outer}")


class _HarmonicProfile:
    """Spatial ingredients of one profile harmonic, spline-evaluated."""

    def __init__(self, flow, k):
        x2 = flow.x2
        chi = flow.chi[k]
        chi2 = flow.chi_second_derivative(k)
        d1 = CubicSpline(x2, chi2).antiderivative()(x2)
        d1 = d1 - CubicSpline(x2, d1).integrate(-1.0, 1.0) / 2.0
        self.chi = CubicSpline(x2, chi)
        self.chi1 = CubicSpline(x2, d1)
        self.chi2 = CubicSpline(x2, chi2)
        self.S = CubicSpline(x2, chi).antiderivative()


@dataclass(frozen=True)
class FluxCarrier:
    flow: PoiseuilleFlow
    geometry: object
    cutoff: CutoffParams
    bump_x: EdgeBump = field(repr=False)
    bump_y: EdgeBump = field(repr=False)
    profiles: dict = field(repr=False)  # k -> _HarmonicProfile
    center_values: dict = field(repr=False)  # k -> complex c_k = S_k(yc)

    @property
    def period(self):
        return self.flow.period

    @property
    def omega(self):
        return self.flow.omega

    @property
    def harmonics(self):
        return sorted(self.profiles)

    def theta(self, x1, x2, dx=0, dy=0):
        return self.bump_x(x1, dx) * self.bump_y(x2, dy)

    def harmonic_fields(self, points, k, need=("V",)):
        """Complex fields of harmonic k >= 0 at (npts, 2) points.

        `need` may contain "V", "grad", "lap", "dt", "dtgrad".  Returns a dict:
        "V" -> (npts, 2); "grad" -> (npts, 2, 2) with grad[:, i, j] = d_j V_i;
        "lap" -> (npts, 2); "dt" -> (npts, 2); "dtgrad" -> (npts, 2, 2).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x1, x2 = pts[:, 0], pts[:, 1]
        pr = self.profiles[k]
        chi, chi1, chi2 = pr.chi(x2), pr.chi1(x2), pr.chi2(x2)
        S = pr.S(x2)
        c = self.center_values[k]
        cs = c - S

        b1 = [self.bump_x(x1, d) for d in range(4)]
        b2 = [self.bump_y(x2, d) for d in range(4)]
        one_m_theta = 1.0 - b1[0] * b2[0]

        out = {}

        def velocity(chi, cs):
            v1 = chi * one_m_theta + cs * b1[0] * b2[1]
            v2 = -cs * b1[1] * b2[0]
            return np.stack([v1, v2], axis=-1)

        def gradient(chi, chi1, cs):
            d1v1 = -chi * b1[1] * b2[0] + cs * b1[1] * b2[1]
            d2v1 = chi1 * one_m_theta - 2.0 * chi * b1[0] * b2[1] + cs * b1[0] * b2[2]
            d1v2 = -cs * b1[2] * b2[0]
            d2v2 = chi * b1[1] * b2[0] - cs * b1[1] * b2[1]
            g = np.empty(pts.shape[:1] + (2, 2), dtype=complex)
            g[:, 0, 0], g[:, 0, 1] = d1v1, d2v1
            g[:, 1, 0], g[:, 1, 1] = d1v2, d2v2
            return g

        if "V" in need:
            out["V"] = velocity(chi, cs)
        if "grad" in need:
            out["grad"] = gradient(chi, chi1, cs)
        if "lap" in need:
            l1 = (
                -chi * b1[2] * b2[0]
                + cs * b1[2] * b2[1]
                + chi2 * one_m_theta
                - 3.0 * chi1 * b1[0] * b2[1]
                - 3.0 * chi * b1[0] * b2[2]
                + cs * b1[0] * b2[3]
            )
            l2 = (
                -cs * b1[3] * b2[0]
                + chi1 * b1[1] * b2[0]
                + 2.0 * chi * b1[1] * b2[1]
                - cs * b1[1] * b2[2]
            )
            out["lap"] = np.stack([l1, l2], axis=-1)
        iwk = 1j * self.omega * k
        if "dt" in need:
            out["dt"] = iwk * velocity(chi, cs)
        if "dtgrad" in need:
            out["dtgrad"] = iwk * gradient(chi, chi1, cs)
        return out

    def velocity_at(self, points, t):
        """Real carrier velocity at time t, shape (npts, 2)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(pts.shape)
        for k in self.harmonics:
            mult = 1.0 if k == 0 else 2.0
            vk = self.harmonic_fields(pts, k, ("V",))["V"]
            out += mult * (vk * np.exp(1j * self.omega * k * t)).real
        return out

    def gradient_at(self, points, t):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(pts.shape[:1] + (2, 2))
        for k in self.harmonics:
            mult = 1.0 if k == 0 else 2.0
            gk = self.harmonic_fields(pts, k, ("grad",))["grad"]
            out += mult * (gk * np.exp(1j * self.omega * k * t)).real
        return out

    def stream_at(self, points, t):
        """Real stream function at time t."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x1, x2 = pts[:, 0], pts[:, 1]
        th = self.theta(x1, x2)
        out = np.zeros(len(pts))
        for k in self.harmonics:
            mult = 1.0 if k == 0 else 2.0
            S = self.profiles[k].S(x2)
            val = S + (self.center_values[k] - S) * th
            out += mult * (val * np.exp(1j * self.omega * k * t)).real
        return out

    def section_flux(self, x1, t, n_quad=2049):
        """Flux of V through the fluid part of the vertical section x1=const."""
        bx0, bx1, by0, by1 = self.geometry.body
        segments = [(-1.0, 1.0)] if not (bx0 <= x1 <= bx1) else [(-1.0, by0), (by1, 1.0)]
        total = 0.0
        for lo, hi in segments:
            y = np.linspace(lo, hi, n_quad)
            pts = np.column_stack([np.full_like(y, x1), y])
            v1 = self.velocity_at(pts, t)[:, 0]
            total += CubicSpline(y, v1).integrate(lo, hi)
        return total


def build_flux_carrier(flow, geometry, cutoff=None):
    """Construct the carrier; errors if the cutoff support leaves the near
    zone or touches the channel walls."""
    cutoff = cutoff or CutoffParams()
    bx0, bx1, by0, by1 = geometry.body
    if by1 + cutoff.outer >= 1.0 or by0 - cutoff.outer <= -1.0:
        raise GeometryError(
            f"cutoff support (outer={cutoff.outer}) touches the channel walls; "
            f"body wall margin is {geometry.wall_margin:.3f}"
        )
    if bx1 + cutoff.outer >= geometry.X0 or bx0 - cutoff.outer <= -geometry.X0:
        raise GeometryError(
            f"cutoff support (outer={cutoff.outer}) leaves the near zone |x1| < X0"
        )
    bump_x = EdgeBump(bx0, bx1, cutoff.inner, cutoff.outer)
    bump_y = EdgeBump(by0, by1, cutoff.inner, cutoff.outer)
    yc = geometry.body_center[1]
    profiles = {k: _HarmonicProfile(flow, k) for k in flow.harmonics}
    centers = {k: complex(pr.S(yc)) for k, pr in profiles.items()}
    return FluxCarrier(
        flow=flow,
        geometry=geometry,
        cutoff=cutoff,
        bump_x=bump_x,
        bump_y=bump_y,
        profiles=profiles,
        center_values=centers,
    )


@dataclass(frozen=True)
class ExternalBodyForce:
    """Separable external body force: bump(x) * direction * signal(t)."""

    box: tuple  # (x0, x1, y0, y1)
    direction: tuple
    signal: PeriodicSignal

    def bump(self, x1, x2):
        from ._bumps import WindowBump

        wx = WindowBump(self.box[0], self.box[1])
        wy = WindowBump(self.box[2], self.box[3])
        return wx(x1) * wy(x2)

    def harmonic_fields(self, points):
        """dict k -> (npts, 2) complex amplitude fields."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        shape = self.bump(pts[:, 0], pts[:, 1])
        d = np.asarray(self.direction, dtype=float)
        base = shape[:, None] * d[None, :]
        return {
            k: c * base
            for k, c in enumerate(self.signal.fourier_coeffs)
            if c != 0
        }

    def l2_l2_norm(self, mesh):
        pts = mesh.centers
        shape_sq = float(np.dot(mesh.weights, self.bump(pts[:, 0], pts[:, 1]) ** 2))
        from .signals import l2_norm_sq

        return math.sqrt(l2_norm_sq(self.signal) * shape_sq)


@dataclass(frozen=True)
class ForcingData:
    carrier: FluxCarrier
    params: object
    cell_idx: np.ndarray  # mesh cells where f may be nonzero
    cell_weights: np.ndarray
    f_harmonics: dict  # k >= 0 -> (ncells_sub, 2) complex
    g: PeriodicSignal
    tilde_f: ExternalBodyForce | None
    tilde_g: PeriodicSignal | None
    mesh: object

    @property
    def period(self):
        return self.carrier.period

    @property
    def pressure_signal(self):
        """psi(t); the carrier pressure is p~ = -psi(t) * x1."""
        return self.carrier.flow.pressure_factor_signal

    def f_at(self, points, t):
        """Real body force at arbitrary points and time (analytic synthesis)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        harmonics = _f_harmonics_at(self.carrier, self.params, pts)
        if self.tilde_f is not None:
            for k, fld in self.tilde_f.harmonic_fields(pts).items():
                harmonics[k] = harmonics.get(k, 0.0) + fld
        out = np.zeros(pts.shape)
        w = self.carrier.omega
        for k, fld in harmonics.items():
            mult = 1.0 if k == 0 else 2.0
            out += mult * (fld * np.exp(1j * w * k * t)).real
        return out

    def f_l2_l2_norm(self):
        """||f||_{L^2(0,T;L^2(Omega))} from harmonic data (Parseval)."""
        total = 0.0
        for k, fld in self.f_harmonics.items():
            mult = 1.0 if k == 0 else 2.0
            total += mult * float(np.dot(self.cell_weights, (np.abs(fld) ** 2).sum(axis=-1)))
        return math.sqrt(self.period * total)

    def f_norm_series(self, n_times=256, dt_order=0):
        """||d^r f/dt^r (t)||_{L^2(Omega)} on a uniform time grid."""
        return _norm_series(
            self.f_harmonics, self.cell_weights, self.period, n_times, dt_order
        )

    def f_mass_outside(self, x1_abs_min=None):
        """L^2(0,T;L^2) mass of f outside |x1| < x1_abs_min (default: Omega_0)."""
        if x1_abs_min is None:
            x1_abs_min = self.carrier.geometry.X0
        pts = self.mesh.centers[self.cell_idx]
        mask = np.abs(pts[:, 0]) >= x1_abs_min
        total = 0.0
        for k, fld in self.f_harmonics.items():
            mult = 1.0 if k == 0 else 2.0
            total += mult * float(
                np.dot(self.cell_weights[mask], (np.abs(fld[mask]) ** 2).sum(axis=-1))
            )
        return math.sqrt(self.period * total)


def _f_harmonics_at(carrier, params, pts):
    """Harmonic amplitudes of the carrier-induced body force at points."""
    nu = params.nu
    ks = carrier.harmonics
    fields = {
        k: carrier.harmonic_fields(pts, k, ("V", "grad", "lap", "dt"))
        for k in ks
    }
    psi = carrier.flow.pressure_coeffs
    out = {}
    e1 = np.array([1.0, 0.0])
    for k in ks:
        fk = nu * fields[k]["lap"] - fields[k]["dt"] + psi.get(k, 0.0) * e1[None, :]
        out[k] = out.get(k, 0.0) + fk
    # quadratic term -(V . grad V): convolution over two-sided harmonics
    def V(k):
        return fields[k]["V"] if k >= 0 else fields[-k]["V"].conj()

    def G(k):
        return fields[k]["grad"] if k >= 0 else fields[-k]["grad"].conj()

    two_sided = sorted(set(ks) | {-k for k in ks})
    for k1 in two_sided:
        v1 = V(k1)
        for k2 in two_sided:
            K = k1 + k2
            if K < 0:
                continue
            g2 = G(k2)
            # (V . grad) V with grad[:, i, j] = d_j V_i
            adv = np.einsum("pj,pij->pi", v1, g2)
            out[K] = out.get(K, 0.0) - adv
    return {k: v for k, v in out.items() if np.abs(v).max() > 0.0}


def _norm_series(harmonic_fields, weights, period, n_times, dt_order=0):
    """Time series of the spatial L^2 norm of a harmonic-represented field."""
    omega = 2.0 * math.pi / period
    ks = sorted(harmonic_fields)
    two_sided = {}
    for k in ks:
        fac = (1j * omega * k) ** dt_order
        two_sided[k] = fac * harmonic_fields[k]
        if k > 0:
            two_sided[-k] = np.conj(two_sided[k])
    # cross Gram over harmonics, then synthesize |f(t)|^2 on the grid
    diff_coeffs = {}
    for ka, fa in two_sided.items():
        for kb, fb in two_sided.items():
            d = ka - kb
            gram = complex(np.einsum("p,pi,pi->", weights, fa, np.conj(fb)))
            diff_coeffs[d] = diff_coeffs.get(d, 0.0) + gram
    times = np.arange(n_times) * (period / n_times)
    series = np.zeros(n_times)
    for d, cval in diff_coeffs.items():
        series += (cval * np.exp(1j * omega * d * times)).real
    return times, np.sqrt(np.maximum(series, 0.0))


def carrier_forces(carrier, params, mesh, tilde_f=None, tilde_g=None):
    """Assemble the forcing fields f (on its support cells) and g.

    The viscous boundary integral in g vanishes because grad V = 0 on the
    body boundary, leaving g = rho * psi(t) * area(B) + tilde_g.
    """
    geom = carrier.geometry
    pts = mesh.centers
    dist = geom.dist_inf_to_body(pts[:, 0], pts[:, 1])
    mask = dist < carrier.cutoff.outer + mesh.h
    if tilde_f is not None:
        b = tilde_f.box
        inside = (
            (pts[:, 0] >= b[0]) & (pts[:, 0] <= b[1])
            & (pts[:, 1] >= b[2]) & (pts[:, 1] <= b[3])
        )
        mask |= inside
    idx = np.nonzero(mask)[0]
    sub = pts[idx]
    f_harm = _f_harmonics_at(carrier, params, sub)
    if tilde_f is not None:
        if not math.isclose(tilde_f.signal.period, carrier.period, rel_tol=1e-12):
            raise ValueError("external body force must share the flow-rate period")
        for k, fld in tilde_f.harmonic_fields(sub).items():
            f_harm[k] = f_harm.get(k, 0.0) + fld

    psi = carrier.flow.pressure_coeffs
    n = max(psi, default=0)
    gc = np.zeros(n + 1, dtype=complex)
    for k, p in psi.items():
        gc[k] = params.rho * geom.body_area * p
    g = PeriodicSignal(carrier.period, gc, carrier.flow.flowrate.grid_size)
    if tilde_g is not None:
        if not math.isclose(tilde_g.period, carrier.period, rel_tol=1e-12):
            raise ValueError("external mass force must share the flow-rate period")
        g = g + tilde_g

    return ForcingData(
        carrier=carrier,
        params=params,
        cell_idx=idx,
        cell_weights=mesh.weights[idx],
        f_harmonics=f_harm,
        g=g,
        tilde_f=tilde_f,
        tilde_g=tilde_g,
        mesh=mesh,
    )


@dataclass(frozen=True)
class ForceBoundRow:
    label: str
    lhs: float
    phi_norm: float
    tilde_norm: float
    empirical_constant: float


def force_bound_report(forces, n_times=256):
    """Empirical constants for the six forcing-vs-flow-rate norm bounds."""
    from .signals import derivative, l2_norm_sq, sobolev_norm_T

    carrier = forces.carrier
    phi = carrier.flow.flowrate
    T = forces.period
    rows = []

    def ratio(lhs, tilde, phinorm):
        return (lhs - tilde) / phinorm if phinorm > 0 else 0.0

    tf_l2 = forces.tilde_f.l2_l2_norm(forces.mesh) if forces.tilde_f else 0.0
    tg_l2 = math.sqrt(l2_norm_sq(forces.tilde_g)) if forces.tilde_g else 0.0

    f_l2 = forces.f_l2_l2_norm()
    p1 = sobolev_norm_T(phi, 1)
    rows.append(ForceBoundRow("f_L2L2_vs_phi_W12", f_l2, p1, tf_l2, ratio(f_l2, tf_l2, p1)))

    g_l2 = math.sqrt(l2_norm_sq(forces.g))
    rows.append(ForceBoundRow("g_L2_vs_phi_W12", g_l2, p1, tg_l2, ratio(g_l2, tg_l2, p1)))

    p2 = sobolev_norm_T(phi, 2)
    _, fser = forces.f_norm_series(n_times)
    f_inf = float(fser.max())
    tf_inf = 0.0
    if forces.tilde_f:
        sig = forces.tilde_f.signal
        tf_inf = sig.max_abs() * math.sqrt(
            float(
                np.dot(
                    forces.mesh.weights,
                    forces.tilde_f.bump(forces.mesh.centers[:, 0], forces.mesh.centers[:, 1]) ** 2,
                )
            )
        )
    rows.append(ForceBoundRow("f_LinfL2_vs_phi_W22", f_inf, p2, tf_inf, ratio(f_inf, tf_inf, p2)))

    g_inf = forces.g.max_abs()
    tg_inf = forces.tilde_g.max_abs() if forces.tilde_g else 0.0
    rows.append(ForceBoundRow("g_Linf_vs_phi_W22", g_inf, p2, tg_inf, ratio(g_inf, tg_inf, p2)))

    p3 = sobolev_norm_T(phi, 3)
    _, dfser = forces.f_norm_series(n_times, dt_order=1)
    df_inf = float(dfser.max())
    tdf_inf = 0.0
    if forces.tilde_f:
        tdf_inf = derivative(forces.tilde_f.signal).max_abs() * math.sqrt(
            float(
                np.dot(
                    forces.mesh.weights,
                    forces.tilde_f.bump(forces.mesh.centers[:, 0], forces.mesh.centers[:, 1]) ** 2,
                )
            )
        )
    rows.append(ForceBoundRow("dfdt_LinfL2_vs_phi_W32", df_inf, p3, tdf_inf, ratio(df_inf, tdf_inf, p3)))

    dg_inf = derivative(forces.g).max_abs()
    tdg_inf = derivative(forces.tilde_g).max_abs() if forces.tilde_g else 0.0
    rows.append(ForceBoundRow("dgdt_Linf_vs_phi_W32", dg_inf, p3, tdg_inf, ratio(dg_inf, tdg_inf, p3)))
    return rows
