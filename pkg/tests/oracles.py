"""Independent oracles used by the test suite.

These are deliberately different algorithms from the library code: the
channel-profile oracle is a Crank-Nicolson time stepper with a bordered flux
constraint (the library solves per-harmonic boundary-value problems), cubic
tensor sums are brute-force triple loops, and the linear-ODE references are
closed forms.
"""

import math

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import lu_factor, lu_solve


def spline_quadrature_weights(x2):
    """Weights w with w . u = integral over [-1, 1] of the cubic spline
    through (x2, u); matches the flux functional used by the profile solver."""
    n = len(x2)
    w = np.empty(n)
    e = np.zeros(n)
    for j in range(n):
        e[:] = 0.0
        e[j] = 1.0
        w[j] = CubicSpline(x2, e).integrate(-1.0, 1.0)
    return w


def womersley_time_stepper(
    flowrate,
    params,
    n_nodes=257,
    steps_per_period=4096,
    max_periods=40,
    settle_tol=1e-11,
):
    """Periodic steady state of the flux-constrained channel-profile problem
    by Crank-Nicolson time stepping.

    Unknowns per step: interior profile values plus the pressure-gradient
    amplitude, coupled through the flux constraint in a bordered linear
    system.  Integrates whole periods until two successive periods agree to
    `settle_tol` in the discrete space-time L2 norm.

    Returns dict with x2, per-step times over one period, the profile history
    (steps_per_period, n_nodes), the pressure-factor history, and the flux
    quadrature weights.
    """
    T = flowrate.period
    nu = params.nu
    x2 = np.linspace(-1.0, 1.0, n_nodes)
    h = x2[1] - x2[0]
    ni = n_nodes - 2
    dt = T / steps_per_period

    D2 = (
        np.diag(np.full(ni, -2.0))
        + np.diag(np.ones(ni - 1), 1)
        + np.diag(np.ones(ni - 1), -1)
    ) / h**2
    w_full = spline_quadrature_weights(x2)
    w_int = w_full[1:-1]

    K = np.zeros((ni + 1, ni + 1))
    K[:ni, :ni] = np.eye(ni) / dt - 0.5 * nu * D2
    K[:ni, ni] = -0.5
    K[ni, :ni] = w_int
    lu = lu_factor(K)
    explicit = np.eye(ni) / dt + 0.5 * nu * D2

    u = np.zeros(ni)
    P = 0.0
    hist = np.zeros((steps_per_period, ni))
    prev_hist = None
    for _ in range(max_periods):
        t = 0.0
        for j in range(steps_per_period):
            hist[j] = u
            rhs = np.empty(ni + 1)
            rhs[:ni] = explicit @ u + 0.5 * P
            rhs[ni] = float(flowrate(t + dt))
            sol = lu_solve(lu, rhs)
            u, P = sol[:ni], sol[ni]
            t += dt
        if prev_hist is not None:
            diff = math.sqrt(dt * h * float(np.sum((hist - prev_hist) ** 2)))
            if diff < settle_tol:
                break
        prev_hist = hist.copy()
    else:
        raise RuntimeError("time stepper did not reach a periodic steady state")

    profiles = np.zeros((steps_per_period, n_nodes))
    profiles[:, 1:-1] = hist
    times = np.arange(steps_per_period) * dt
    return {
        "x2": x2,
        "times": times,
        "profiles": profiles,
        "weights": w_full,
        "dt": dt,
    }


def cubic_sum_bruteforce(c, a):
    """Triple-loop evaluation of sum_{i,j,k} c[i,j,k] a_i a_j a_k."""
    n = len(a)
    total = 0.0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                total += c[i, j, k] * a[i] * a[j] * a[k]
    return total


def damped_cosine_response(omega_f, times):
    """Closed-form periodic solution of x' = -x + cos(omega_f t)."""
    return (np.cos(omega_f * times) + omega_f * np.sin(omega_f * times)) / (
        1.0 + omega_f**2
    )
