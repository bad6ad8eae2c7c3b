"""T-periodic scalar signals as truncated Fourier series.

A real signal is stored one-sided: complex amplitudes c_k for k = 0..N with
the convention c_{-k} = conj(c_k), so

    s(t) = c_0 + 2 * sum_{k>=1} Re(c_k * exp(2*pi*i*k*t/T)).

Signals are immutable; all operations return new instances.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_GRID_SIZE = 256
MAX_DERIVATIVE_ORDER = 3


@dataclass(frozen=True)
class PeriodicSignal:
    period: float
    fourier_coeffs: np.ndarray  # complex, index k = 0..N (one-sided)
    grid_size: int = DEFAULT_GRID_SIZE
    grid_samples: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        coeffs = np.asarray(self.fourier_coeffs, dtype=complex)
        object.__setattr__(self, "fourier_coeffs", coeffs)
        object.__setattr__(self, "grid_samples", self(self.grid_times))

    @property
    def omega(self):
        return 2.0 * math.pi / self.period

    @property
    def n_harmonics(self):
        return len(self.fourier_coeffs) - 1

    @property
    def grid_times(self):
        return np.arange(self.grid_size) * (self.period / self.grid_size)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.arange(1, len(self.fourier_coeffs))
        phases = np.exp(1j * self.omega * np.multiply.outer(t, k))
        val = self.fourier_coeffs[0].real + 2.0 * (phases @ self.fourier_coeffs[1:]).real
        return val if val.shape else float(val)

    def __add__(self, other):
        if not isinstance(other, PeriodicSignal):
            return NotImplemented
        if not math.isclose(self.period, other.period, rel_tol=1e-12):
            raise ValueError("cannot add signals with different periods")
        n = max(len(self.fourier_coeffs), len(other.fourier_coeffs))
        c = np.zeros(n, dtype=complex)
        c[: len(self.fourier_coeffs)] += self.fourier_coeffs
        c[: len(other.fourier_coeffs)] += other.fourier_coeffs
        return PeriodicSignal(self.period, c, grid_size=max(self.grid_size, other.grid_size))

    def scaled(self, factor):
        return PeriodicSignal(self.period, float(factor) * self.fourier_coeffs, self.grid_size)

    def max_abs(self):
        return float(np.max(np.abs(self.grid_samples))) if self.grid_size else 0.0

    def is_zero(self, tol=0.0):
        return bool(np.all(np.abs(self.fourier_coeffs) <= tol))

    def to_json_dict(self):
        return {
            "T": self.period,
            "harmonics": [
                [int(k), float(c.real), float(c.imag)]
                for k, c in enumerate(self.fourier_coeffs)
                if c != 0 or k == 0
            ],
        }

    def dump_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)


def make_signal(period, coeffs, grid_size=DEFAULT_GRID_SIZE):
    """Build a real T-periodic signal from harmonic amplitudes.

    `coeffs` maps harmonic index k (possibly negative) to a complex amplitude,
    or is a sequence of (k, re, im) / (k, complex) entries.  When both k and
    -k are supplied they must be complex conjugates; supplying only one side
    implies the conjugate.  A non-real c_0 is rejected.
    """
    if not (isinstance(period, (int, float)) and math.isfinite(period) and period > 0):
        raise ValueError(f"period must be a positive finite real, got {period!r}")
    entries = {}
    items = coeffs.items() if isinstance(coeffs, dict) else None
    if items is None:
        items = []
        for row in coeffs:
            row = list(row)
            if len(row) == 2:
                items.append((int(row[0]), complex(row[1])))
            elif len(row) == 3:
                items.append((int(row[0]), complex(float(row[1]), float(row[2]))))
            else:
                raise ValueError(f"cannot parse harmonic entry {row!r}")
    for k, c in items:
        c = complex(c)
        if not (math.isfinite(c.real) and math.isfinite(c.imag)):
            raise ValueError(f"non-finite coefficient for harmonic {k}")
        if k in entries:
            raise ValueError(f"duplicate harmonic {k}")
        entries[int(k)] = c

    if 0 in entries and abs(entries[0].imag) > 1e-14 * (1.0 + abs(entries[0])):
        raise ValueError("harmonic 0 of a real signal must be real")
    for k in list(entries):
        if k < 0:
            if -k in entries:
                mismatch = abs(entries[-k] - entries[k].conjugate())
                if mismatch > 1e-12 * (1.0 + abs(entries[-k])):
                    raise ValueError(
                        f"harmonics {k} and {-k} are not complex conjugates "
                        f"(mismatch {mismatch:.2e}); refusing to symmetrize"
                    )
            else:
                entries[-k] = entries[k].conjugate()
            del entries[k]

    n = max(entries) if entries else 0
    one_sided = np.zeros(n + 1, dtype=complex)
    for k, c in entries.items():
        one_sided[k] = c
    one_sided[0] = one_sided[0].real
    return PeriodicSignal(float(period), one_sided, grid_size=grid_size)


def zero_signal(period, grid_size=DEFAULT_GRID_SIZE):
    return make_signal(period, {0: 0.0}, grid_size=grid_size)


def sine_signal(period, amplitude=1.0, harmonic=1, grid_size=DEFAULT_GRID_SIZE):
    """amplitude * sin(2*pi*harmonic*t/T)."""
    return make_signal(period, {harmonic: -0.5j * amplitude}, grid_size=grid_size)


def constant_signal(period, value, grid_size=DEFAULT_GRID_SIZE):
    return make_signal(period, {0: value}, grid_size=grid_size)


def signal_from_json_dict(data, grid_size=DEFAULT_GRID_SIZE):
    return make_signal(data["T"], data["harmonics"], grid_size=grid_size)


def derivative(signal, order=1):
    """Harmonic-wise time derivative, order <= 3."""
    order = int(order)
    if order < 0 or order > MAX_DERIVATIVE_ORDER:
        raise ValueError(f"derivative order must be in 0..{MAX_DERIVATIVE_ORDER}")
    k = np.arange(len(signal.fourier_coeffs))
    c = signal.fourier_coeffs * (1j * signal.omega * k) ** order
    return PeriodicSignal(signal.period, c, signal.grid_size)


def antiderivative(signal):
    """Periodic antiderivative of a mean-zero signal (zero mean itself)."""
    if abs(signal.fourier_coeffs[0]) > 1e-13 * (1.0 + np.abs(signal.fourier_coeffs).max()):
        raise ValueError("antiderivative requires a mean-zero signal")
    c = signal.fourier_coeffs.copy()
    k = np.arange(1, len(c))
    c[1:] = c[1:] / (1j * signal.omega * k)
    c[0] = 0.0
    return PeriodicSignal(signal.period, c, signal.grid_size)


def l2_norm_sq(signal, deriv_order=0):
    """Squared L^2(0,T) norm of the deriv_order-th derivative (Parseval)."""
    k = np.arange(len(signal.fourier_coeffs))
    amp2 = np.abs(signal.fourier_coeffs) ** 2 * (signal.omega * k) ** (2 * deriv_order)
    mult = np.full(len(k), 2.0)
    mult[0] = 1.0
    return signal.period * float(np.dot(mult, amp2))


def sobolev_norm_T(signal, m):
    """W^{m,2}_T norm: (sum_{j<=m} ||d^j s/dt^j||^2_{L^2(0,T)})^{1/2}."""
    m = int(m)
    if m < 0 or m > MAX_DERIVATIVE_ORDER:
        raise ValueError(f"Sobolev order must be in 0..{MAX_DERIVATIVE_ORDER}")
    return math.sqrt(sum(l2_norm_sq(signal, j) for j in range(m + 1)))
