"""Generalized T-periodic Poiseuille (Womersley) flow on the cross-section.

For a prescribed T-periodic flow rate phi the unidirectional profile
chi(x2, t) e1 solves, harmonic by harmonic,

    (i*w*k) chi_k - nu * chi_k'' = P_k   on (-1, 1),   chi_k(+-1) = 0,

with the pressure-gradient amplitude P_k chosen so that the flux of chi_k
equals phi_k.  The profile shape has no self-advection (d/dx1 chi = 0), so
the harmonics decouple exactly and the map phi -> chi is linear.

The corresponding pressure factor is psi(t) with pressure field
p~ = -psi(t) x1; harmonic-wise psi_k = P_k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .errors import ResolutionError
from .signals import PeriodicSignal, derivative, sobolev_norm_T

DEFAULT_PROFILE_NODES = 129
MIN_NODES_PER_STOKES_LAYER = 4


def _fd_solve(alpha, nu, x2):
    """Solve alpha*u - nu*u'' = 1 on the grid with homogeneous Dirichlet BCs."""
    n = len(x2)
    h = x2[1] - x2[0]
    ni = n - 2
    ab = np.zeros((3, ni), dtype=complex)
    ab[0, 1:] = -nu / h**2
    ab[1, :] = alpha + 2.0 * nu / h**2
    ab[2, :-1] = -nu / h**2
    rhs = np.ones(ni, dtype=complex)
    u = np.zeros(n, dtype=complex)
    u[1:-1] = solve_banded((1, 1), ab, rhs)
    return u


@dataclass(frozen=True)
class PoiseuilleFlow:
    flowrate: PeriodicSignal
    params: object
    x2: np.ndarray
    chi: dict  # harmonic k -> complex profile on x2 (c_{-k} = conj(c_k))
    pressure_coeffs: dict  # harmonic k -> complex P_k
    pressure_factor_signal: PeriodicSignal = field(init=False, repr=False)

    def __post_init__(self):
        n = max(self.pressure_coeffs, default=0)
        c = np.zeros(n + 1, dtype=complex)
        for k, p in self.pressure_coeffs.items():
            c[k] = p
        object.__setattr__(
            self,
            "pressure_factor_signal",
            PeriodicSignal(self.flowrate.period, c, self.flowrate.grid_size),
        )

    @property
    def period(self):
        return self.flowrate.period

    @property
    def omega(self):
        return self.flowrate.omega

    @property
    def harmonics(self):
        return sorted(self.chi)

    def chi_second_derivative(self, k):
        """Exact chi_k'' from the harmonic ODE (no differentiation noise)."""
        nu = self.params.nu
        return (1j * self.omega * k * self.chi[k] - self.pressure_coeffs.get(k, 0.0)) / nu

    def profile_at(self, t, x2=None):
        """Real profile chi(x2, t); x2 defaults to the solver grid."""
        vals = self.chi if x2 is None else {k: CubicSpline(self.x2, v)(x2) for k, v in self.chi.items()}
        shape = len(self.x2) if x2 is None else np.shape(np.asarray(x2))
        out = np.zeros(shape)
        for k, v in vals.items():
            mult = 1.0 if k == 0 else 2.0
            out = out + mult * (v * np.exp(1j * self.omega * k * t)).real
        return out

    def flux_at(self, t):
        spl_total = {k: CubicSpline(self.x2, v).integrate(-1.0, 1.0) for k, v in self.chi.items()}
        total = 0.0
        for k, q in spl_total.items():
            mult = 1.0 if k == 0 else 2.0
            total += mult * (q * np.exp(1j * self.omega * k * t)).real
        return total


def solve_poiseuille(flowrate, params, n_nodes=DEFAULT_PROFILE_NODES, geometry=None):
    """Solve the per-harmonic profile problems for the given flow rate.

    `geometry` is accepted for interface symmetry but the cross-section is
    always (-1, 1).  Raises ResolutionError when the Stokes layer of the
    highest active harmonic spans fewer than 4 grid nodes.
    """
    x2 = np.linspace(-1.0, 1.0, int(n_nodes))
    h = x2[1] - x2[0]
    nu = params.nu
    omega = flowrate.omega

    active = [k for k, c in enumerate(flowrate.fourier_coeffs) if c != 0]
    kmax = max((k for k in active if k > 0), default=0)
    if kmax > 0:
        layer = math.sqrt(nu * flowrate.period / (2.0 * math.pi * kmax))
        if layer / h < MIN_NODES_PER_STOKES_LAYER:
            raise ResolutionError(
                f"Stokes layer {layer:.3e} of harmonic {kmax} spans "
                f"{layer / h:.1f} < {MIN_NODES_PER_STOKES_LAYER} grid nodes; "
                "increase the profile resolution"
            )

    chi, pressure = {}, {}
    for k in active:
        alpha = 1j * omega * k
        unit = _fd_solve(alpha, nu, x2)
        flux_unit = complex(CubicSpline(x2, unit).integrate(-1.0, 1.0))
        if abs(flux_unit) < 1e-300:
            raise ResolutionError(f"singular flux response for harmonic {k}")
        p_k = complex(flowrate.fourier_coeffs[k]) / flux_unit
        chi[k] = p_k * unit
        pressure[k] = p_k
    if not chi:
        chi[0] = np.zeros_like(x2, dtype=complex)
        pressure[0] = 0.0 + 0.0j

    return PoiseuilleFlow(
        flowrate=flowrate, params=params, x2=x2, chi=chi, pressure_coeffs=pressure
    )


def pressure_factor(flow, t):
    """psi(t) = (1/|Pi|)(dphi/dt - nu * integral of chi'') = P(t)."""
    return flow.pressure_factor_signal(t)


def _spatial_norms_sq(flow, k):
    """(L2, W12, W22) squared spatial norms of the complex profile chi_k."""
    x2 = flow.x2
    v = flow.chi[k]
    d2 = flow.chi_second_derivative(k)
    # chi' = antiderivative of the exact chi'' up to a constant fixed by
    # chi(1) - chi(-1) = 0
    d1 = CubicSpline(x2, d2).antiderivative()(x2)
    d1 = d1 - CubicSpline(x2, d1).integrate(-1.0, 1.0) / 2.0

    def nrm2(u):
        return float(CubicSpline(x2, np.abs(u) ** 2).integrate(-1.0, 1.0))

    l2 = nrm2(v)
    w12 = l2 + nrm2(d1)
    w22 = w12 + nrm2(d2)
    return l2, w12, w22


@dataclass(frozen=True)
class ChiNormRow:
    order: int  # 1, 2 or 3: row of the estimate family
    wk_w22: float  # ||chi||_{W^{m-1,2}(0,T;W^{2,2})}
    ck_w12: float  # ||chi||_{C^{m-1}((0,T);W^{1,2})}
    wk1_l2: float  # ||chi||_{W^{m,2}(0,T;L^2)}
    phi_norm: float  # ||phi||_{W^{m,2}_T}
    ratios: tuple  # the three empirical constants (lhs / phi_norm)


def chi_norm_report(flow, grid_size=256):
    """Empirical constants for the nine profile-vs-flow-rate norm bounds."""
    T = flow.period
    omega = flow.omega
    rows = []
    sp = {k: _spatial_norms_sq(flow, k) for k in flow.harmonics}
    times = np.arange(grid_size) * (T / grid_size)
    for m in (1, 2, 3):
        # time-Sobolev norms via Parseval over harmonics
        wk_w22_sq = 0.0
        wk1_l2_sq = 0.0
        for k in flow.harmonics:
            mult = 1.0 if k == 0 else 2.0
            wfac = sum((omega * k) ** (2 * j) for j in range(m))
            wfac1 = sum((omega * k) ** (2 * j) for j in range(m + 1))
            wk_w22_sq += T * mult * wfac * sp[k][2]
            wk1_l2_sq += T * mult * wfac1 * sp[k][0]
        # sup-in-time W^{1,2} norm of the (m-1)-th time derivative
        sup = 0.0
        for t in times:
            val = 0.0
            for k in flow.harmonics:
                mult = 1.0 if k == 0 else 2.0
                amp = abs((1j * omega * k) ** (m - 1) * np.exp(1j * omega * k * t)) ** 2
                val += mult * amp * sp[k][1]
            sup = max(sup, val)
        phi_norm = sobolev_norm_T(flow.flowrate, m)
        lhs = (math.sqrt(wk_w22_sq), math.sqrt(sup), math.sqrt(wk1_l2_sq))
        ratios = tuple((v / phi_norm if phi_norm > 0 else 0.0) for v in lhs)
        rows.append(
            ChiNormRow(
                order=m,
                wk_w22=lhs[0],
                ck_w12=lhs[1],
                wk1_l2=lhs[2],
                phi_norm=phi_norm,
                ratios=ratios,
            )
        )
    return rows


def flux_error(flow, n_times=64):
    """Max over a time grid of |flux(chi) - phi(t)| (construction check)."""
    times = np.arange(n_times) * (flow.period / n_times)
    return max(abs(flow.flux_at(t) - flow.flowrate(t)) for t in times)
