"""Causal IIR filters for IMU preprocessing.

Two filters are used: a second-order Butterworth low-pass that removes impact
and sensor noise, and a unity-gain first-order low-pass ("pseudo-integration")
that turns angular velocity into a drift-free pseudo angle and accelerations
into pseudo velocities. Both are discretized with the bilinear transform,
pre-warped at the cutoff.

Everything runs forward in time. ``apply_filter`` is the offline form and is
written with the exact floating-point expressions of ``filter_step`` so that
streaming and batch outputs are bitwise identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidParameterError, NonFiniteInputError

SAMPLE_RATE = 200.0
BUTTER_CUTOFF = 12.0
T_ANGLE = 1.0
T_VELOCITY = 1.0 / 3.0


@dataclass(frozen=True)
class FilterCoefficients:
    """Transfer function coefficients with ``a0`` normalized to 1.

    ``feedforward`` is ``(b0, b1, b2)``, ``feedback`` is ``(a1, a2)``. A
    first-order section uses ``b2 = a2 = 0``.
    """

    feedforward: tuple[float, float, float]
    feedback: tuple[float, float]
    order: int = 2

    @property
    def dc_gain(self) -> float:
        b0, b1, b2 = self.feedforward
        a1, a2 = self.feedback
        return (b0 + b1 + b2) / (1.0 + a1 + a2)

    def poles(self) -> np.ndarray:
        a1, a2 = self.feedback
        if self.order == 1:
            return np.array([-a1], dtype=complex)
        return np.roots([1.0, a1, a2])

    def frequency_response(self, freq, sample_rate: float) -> np.ndarray:
        """Complex response H(e^{jw}) at ``freq`` (Hz)."""
        w = 2.0 * np.pi * np.asarray(freq, dtype=float) / sample_rate
        z1 = np.exp(-1j * w)
        z2 = z1 * z1
        b0, b1, b2 = self.feedforward
        a1, a2 = self.feedback
        return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2)


@dataclass
class FilterState:
    """Transposed direct-form II delay line (2 values per biquad, 1 for first order)."""

    z: list[float] = field(default_factory=lambda: [0.0, 0.0])

    @classmethod
    def zeros(cls, order: int = 2) -> "FilterState":
        return cls([0.0] * order)

    def reset(self) -> None:
        for i in range(len(self.z)):
            self.z[i] = 0.0

    def copy(self) -> "FilterState":
        return FilterState(list(self.z))


@dataclass(frozen=True)
class PseudoIntegratorSpec:
    time_constant: float
    sample_rate: float = SAMPLE_RATE

    def __post_init__(self):
        if not (self.time_constant > 0 and math.isfinite(self.time_constant)):
            raise InvalidParameterError(f"time constant must be > 0, got {self.time_constant}")
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise InvalidParameterError(f"sample rate must be > 0, got {self.sample_rate}")


def design_butterworth2(cutoff: float, sample_rate: float = SAMPLE_RATE) -> FilterCoefficients:
    """Second-order Butterworth low-pass via pre-warped bilinear transform.

    The analog prototype ``1 / (s^2 + sqrt(2) s + 1)`` is scaled so that the
    digital magnitude is exactly -3.01 dB at ``cutoff``.
    """
    if not (0.0 < cutoff < sample_rate / 2.0):
        raise InvalidParameterError(
            f"cutoff must lie in (0, {sample_rate / 2.0}) Hz, got {cutoff}"
        )
    k = math.tan(math.pi * cutoff / sample_rate)
    k2 = k * k
    norm = 1.0 / (1.0 + math.sqrt(2.0) * k + k2)
    b0 = k2 * norm
    a1 = 2.0 * (k2 - 1.0) * norm
    a2 = (1.0 - math.sqrt(2.0) * k + k2) * norm
    return FilterCoefficients((b0, 2.0 * b0, b0), (a1, a2), order=2)


@lru_cache(maxsize=64)
def design_first_order_lowpass(time_constant: float, sample_rate: float = SAMPLE_RATE) -> FilterCoefficients:
    """Discretize ``1 / (T s + 1)`` by Tustin, pre-warped at ``1 / T`` rad/s."""
    if not time_constant > 0:
        raise InvalidParameterError(f"time constant must be > 0, got {time_constant}")
    wc = 1.0 / time_constant
    # prewarped bilinear constant: s -> c (1 - z^-1) / (1 + z^-1)
    c = wc / math.tan(wc / (2.0 * sample_rate))
    ct = c * time_constant
    b0 = 1.0 / (ct + 1.0)
    a1 = (1.0 - ct) / (ct + 1.0)
    return FilterCoefficients((b0, b0, 0.0), (a1, 0.0), order=1)


def pseudo_integrator_coefficients(spec: PseudoIntegratorSpec) -> FilterCoefficients:
    return design_first_order_lowpass(spec.time_constant, spec.sample_rate)


def filter_step(coeffs: FilterCoefficients, state: FilterState, x: float) -> float:
    """Advance the filter by one sample and return the output."""
    if not math.isfinite(x):
        raise NonFiniteInputError(f"non-finite filter input: {x!r}")
    b0, b1, b2 = coeffs.feedforward
    a1, a2 = coeffs.feedback
    z = state.z
    y = b0 * x + z[0]
    if coeffs.order == 1:
        z[0] = b1 * x - a1 * y
    else:
        z[0] = b1 * x - a1 * y + z[1]
        z[1] = b2 * x - a2 * y
    return y


def pseudo_integrate(spec: PseudoIntegratorSpec, state: FilterState, x: float) -> float:
    return filter_step(pseudo_integrator_coefficients(spec), state, x)


def prime_state(coeffs: FilterCoefficients, x0: float) -> FilterState:
    """State for which a constant input ``x0`` is already at steady state.

    Used to start a recording without the gravity-offset transient; this only
    looks at the first sample so it stays causal.
    """
    if not math.isfinite(x0):
        raise NonFiniteInputError(f"non-finite filter input: {x0!r}")
    b0, b1, b2 = coeffs.feedforward
    a1, a2 = coeffs.feedback
    y = x0 * coeffs.dc_gain
    if coeffs.order == 1:
        return FilterState([b1 * x0 - a1 * y])
    z1 = b2 * x0 - a2 * y
    z0 = b1 * x0 - a1 * y + z1
    return FilterState([z0, z1])


def apply_filter(coeffs: FilterCoefficients, x, state: FilterState | None = None) -> np.ndarray:
    """Filter a whole series causally. ``state`` (if given) is advanced in place."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidParameterError("apply_filter expects a 1-D series")
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.isfinite(x))[0])
        raise NonFiniteInputError(f"non-finite filter input at sample {bad}")
    if state is None:
        state = FilterState.zeros(coeffs.order)
    b0, b1, b2 = coeffs.feedforward
    a1, a2 = coeffs.feedback
    out = np.empty_like(x)
    # same expressions as filter_step, kept in local variables for speed
    if coeffs.order == 1:
        z0 = state.z[0]
        for i, xi in enumerate(x.tolist()):
            y = b0 * xi + z0
            z0 = b1 * xi - a1 * y
            out[i] = y
        state.z[0] = z0
    else:
        z0, z1 = state.z
        for i, xi in enumerate(x.tolist()):
            y = b0 * xi + z0
            z0 = b1 * xi - a1 * y + z1
            z1 = b2 * xi - a2 * y
            out[i] = y
        state.z[0], state.z[1] = z0, z1
    return out


def amplitude_spectrum(signal, sample_rate: float = SAMPLE_RATE) -> tuple[np.ndarray, np.ndarray]:
    """Single-sided amplitude spectrum.

    A sinusoid of amplitude ``A`` at an exact bin frequency shows up with
    magnitude ``A``; a constant ``c`` shows up as ``c`` in the 0 Hz bin.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InvalidParameterError("amplitude spectrum needs a 1-D signal of length >= 2")
    n = x.size
    freq = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    mag = np.abs(np.fft.rfft(x)) / n
    if n % 2 == 0:
        mag[1:-1] *= 2.0
    else:
        mag[1:] *= 2.0
    return freq, mag
