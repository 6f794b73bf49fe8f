"""Multi-sine signals: construction, sampling, and spectral peak extraction.

Input and target signals are finite sums of cosines,

    u(t) = sum_k a_k cos(omega_k t + psi_k),
    y(t) = sum_k b_k cos(omega_k t + phi_k),

which makes every quantity downstream (reservoir response, readout training)
available in closed form.  ``extract_common_frequencies`` recovers such a
description from raw samples by picking spectral peaks present in both the
input and the target.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


class FewerThanKCommonPeaks(ValueError):
    """The input and target spectra share fewer usable peaks than requested."""


def wrap_phase(phi):
    """Wrap an angle (scalar or array) into (-pi, pi]."""
    return math.pi - np.remainder(math.pi - np.asarray(phi, dtype=float), TWO_PI)


@dataclass(frozen=True)
class MultiSineSignal:
    """A finite sum of cosines, stored as (omega, amplitude, phase) components.

    Components are kept sorted by ascending frequency.  Frequencies must be
    positive and distinct, amplitudes nonnegative, phases in (-pi, pi].
    """

    components: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        comps = tuple(
            (float(w), float(a), float(p)) for w, a, p in self.components
        )
        comps = tuple(sorted(comps, key=lambda c: c[0]))
        object.__setattr__(self, "components", comps)
        omegas = [c[0] for c in comps]
        if any(w <= 0.0 for w in omegas):
            raise ValueError("frequencies must be positive")
        if len(set(omegas)) != len(omegas):
            raise ValueError("frequencies must be distinct")
        if any(c[1] < 0.0 for c in comps):
            raise ValueError("amplitudes must be nonnegative")
        if any(not (-math.pi < c[2] <= math.pi) for c in comps):
            raise ValueError("phases must lie in (-pi, pi]")

    @classmethod
    def from_arrays(cls, omegas, amplitudes, phases=None) -> "MultiSineSignal":
        omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        amplitudes = np.atleast_1d(np.asarray(amplitudes, dtype=float))
        if phases is None:
            phases = np.zeros_like(omegas)
        phases = wrap_phase(np.atleast_1d(np.asarray(phases, dtype=float)))
        if not (omegas.shape == amplitudes.shape == phases.shape):
            raise ValueError("omegas, amplitudes and phases must have equal length")
        return cls(tuple(zip(omegas.tolist(), amplitudes.tolist(), phases.tolist())))

    def __len__(self) -> int:
        return len(self.components)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([c[0] for c in self.components])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([c[1] for c in self.components])

    @property
    def phases(self) -> np.ndarray:
        return np.array([c[2] for c in self.components])

    @property
    def omega_max(self) -> float:
        return self.components[-1][0] if self.components else 0.0

    def evaluate(self, t) -> np.ndarray:
        """Evaluate the signal exactly at arbitrary times."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for w, a, p in self.components:
            out += a * np.cos(w * t + p)
        return out


@dataclass(frozen=True)
class SampledSeries:
    """Evenly spaced samples; ``values[k]`` is the value at ``t0 + k * tau``.

    ``source`` optionally records the signal the samples came from, which
    lets the reservoir integrator evaluate the input between grid points
    exactly instead of interpolating.
    """

    values: np.ndarray
    tau: float
    t0: float = 0.0
    source: MultiSineSignal | None = field(default=None, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.tau * np.arange(len(self.values))


def sample(signal: MultiSineSignal, n_steps: int, tau: float, t0: float = 0.0) -> SampledSeries:
    """Sample ``signal`` at ``t0 + k * tau`` for k = 0 .. n_steps - 1."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    t = t0 + tau * np.arange(n_steps)
    return SampledSeries(values=signal.evaluate(t), tau=tau, t0=t0, source=signal)


def write_series_csv(path, series: SampledSeries) -> None:
    """Write a series as two-column CSV (time, value), 15 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "value"])
        for t, v in zip(series.times, series.values):
            writer.writerow([format(t, ".15g"), format(v, ".15g")])


def _peak_bins(magnitude: np.ndarray, floor_ratio: float = 1e-6) -> set[int]:
    """Indices of strict local maxima above a relative floor.

    Bin 0 (DC) and the last bin (Nyquist edge) are never peaks.
    """
    floor = floor_ratio * magnitude.max()
    inner = magnitude[1:-1]
    is_peak = (inner > magnitude[:-2]) & (inner > magnitude[2:]) & (inner >= floor)
    return set((np.nonzero(is_peak)[0] + 1).tolist())


def extract_common_frequencies(
    u: SampledSeries, y: SampledSeries, k: int
) -> tuple[np.ndarray, MultiSineSignal, MultiSineSignal]:
    """Recover the K strongest frequencies shared by an input/target pair.

    Peaks are local maxima of the one-sided DFT magnitude present at the same
    bin in both spectra, ranked by the smaller of the two magnitudes; ties go
    to the lower frequency.  Amplitude and phase per signal come from the DFT
    coefficient at the peak bin (factor 2/T, with the phase referenced back to
    absolute time through each series' t0).

    Returns ``(omegas, u_signal, y_signal)``.

    Raises
    ------
    FewerThanKCommonPeaks
        If fewer than ``k`` common peaks exist.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(u) != len(y):
        raise ValueError("series must have equal length")
    if u.tau != y.tau:
        raise ValueError("series must share the sampling interval")
    n = len(u)
    spec_u = np.fft.rfft(u.values)
    spec_y = np.fft.rfft(y.values)
    mag_u = np.abs(spec_u)
    mag_y = np.abs(spec_y)
    common = _peak_bins(mag_u) & _peak_bins(mag_y)
    if len(common) < k:
        raise FewerThanKCommonPeaks(
            f"found {len(common)} common spectral peaks, need {k}"
        )
    ranked = sorted(common, key=lambda m: (-min(mag_u[m], mag_y[m]), m))
    bins = np.array(sorted(ranked[:k]))

    omegas = TWO_PI * bins / (n * u.tau)

    def build(spec, t0):
        amps = 2.0 * np.abs(spec[bins]) / n
        phases = wrap_phase(np.angle(spec[bins]) - omegas * t0)
        return MultiSineSignal.from_arrays(omegas, amps, phases)

    return omegas, build(spec_u, u.t0), build(spec_y, y.t0)
