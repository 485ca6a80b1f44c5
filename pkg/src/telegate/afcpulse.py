"""Synthesis and verification of comb-preparation waveforms.

A comb of N teeth spaced delta is burned by summing N complex hyperbolic
secant (CHS) pulses, one per tooth.  Summing them in phase piles all the
energy at the pulse centre; adding the quadratic Schroeder phase
Phi_n = pi n^2 / (2N) and cyclically staggering the pulse centres by
(n-1) T / N spreads the energy in time and slashes the crest factor, which is
what makes large-N combs preparable at fixed drive power.

Two carrier variants exist: the real sin-carrier waveform (single-pass
modulator) and its complex-exponential extension (for a double-pass
modulator, which needs :func:`double_pass_transform` because the drive sees
the modulation twice).

Synthesis runs at baseband: the physical centre frequency enters only as the
``f0`` offset, 0 by default, and tooth positions are reported relative to it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sp_signal

VARIANTS = ("real_sin_weighted", "complex_exponential")
PHASE_SCHEMES = ("schroeder", "flat")


@dataclass(frozen=True)
class AfcPulseParams:
    """Comb-preparation parameters.

    delta is the comb tooth spacing (sets the re-emission delay 1/delta);
    delta_f controls the CHS chirp span and defaults to delta/11; the
    resulting tooth width is gamma = delta - delta_f.
    """

    t_prep_s: float = 8.018e-3
    n_teeth: int = 1927
    delta_hz: float = 1.0 / 80.315e-6
    beta_per_s: float | None = None
    delta_f_hz: float | None = None
    f0_hz: float = 0.0

    def __post_init__(self):
        if self.n_teeth < 1:
            raise ValueError("need at least one comb tooth")
        if self.t_prep_s <= 0 or self.delta_hz <= 0:
            raise ValueError("pulse duration and tooth spacing must be positive")
        if self.beta_per_s is None:
            object.__setattr__(self, "beta_per_s", 17.627 / self.t_prep_s)
        if self.delta_f_hz is None:
            object.__setattr__(self, "delta_f_hz", self.delta_hz / 11.0)
        if not 0 < self.delta_f_hz < self.delta_hz:
            raise ValueError("delta_f must lie strictly between 0 and delta")

    @property
    def gamma_hz(self) -> float:
        return self.delta_hz - self.delta_f_hz

    @property
    def total_span_hz(self) -> float:
        return self.n_teeth * self.delta_hz

    def tooth_offset_hz(self, n: int) -> float:
        """Carrier offset of tooth n (1-based) from f0."""
        return (n - (self.n_teeth + 1) / 2.0) * self.delta_hz


@dataclass
class AfcWaveform:
    """Sampled synthesis result, normalized to unit peak magnitude."""

    samples: np.ndarray
    sample_rate_hz: float
    params: AfcPulseParams
    variant: str = "complex_exponential"
    prenorm_peak: float = 1.0

    @property
    def times_s(self) -> np.ndarray:
        return np.arange(len(self.samples)) / self.sample_rate_hz

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def _sech(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    e = np.exp(-ax)
    return 2.0 * e / (1.0 + e * e)


def _log_cosh(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


def _chs_envelope_and_arg(n: int, params: AfcPulseParams, t: np.ndarray
                          ) -> tuple[np.ndarray, np.ndarray]:
    tau = t - params.t_prep_s / 2.0
    beta = params.beta_per_s
    env = _sech(beta * tau)
    carrier = params.f0_hz + params.tooth_offset_hz(n)
    arg = (2.0 * np.pi * carrier * tau
           + 2.0 * np.pi * (params.delta_f_hz / (2.0 * beta)) * _log_cosh(beta * tau))
    return env, arg


def chs_pulse(n: int, params: AfcPulseParams, t) -> np.ndarray:
    """Real CHS pulse for tooth n: sech envelope times a chirped sine."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > params.t_prep_s):
        raise ValueError("t must lie within [0, t_prep]")
    if not 1 <= n <= params.n_teeth:
        raise ValueError(f"tooth index {n} outside 1..{params.n_teeth}")
    env, arg = _chs_envelope_and_arg(n, params, t)
    return env * np.sin(arg)


def chs_envelope(params: AfcPulseParams, t) -> np.ndarray:
    """sech envelope common to all teeth; peaks at 1 in the pulse centre."""
    t = np.asarray(t, dtype=float)
    return _sech(params.beta_per_s * (t - params.t_prep_s / 2.0))


def schroeder_phase(n: int, n_teeth: int, floor_variant: bool = False) -> float:
    """Quadratic multitone phase pi n^2 / (2 N).

    ``floor_variant`` applies an integer floor inside the bracket; both
    spread the pulse centres, the continuous form is the default.
    """
    if n_teeth < 1:
        raise ValueError("tooth count must be positive")
    if n < 0:
        raise ValueError("tooth index must be non-negative")
    inner = n * n / (2.0 * n_teeth)
    return math.pi * (math.floor(inner) if floor_variant else inner)


def synth_prep_waveform(params: AfcPulseParams, sample_rate_hz: float,
                        variant: str = "complex_exponential",
                        phase_scheme: str = "schroeder",
                        floor_variant: bool = False) -> AfcWaveform:
    """Sum the per-tooth CHS pulses into the comb-preparation waveform.

    With the Schroeder scheme, tooth n is weighted by its quadratic phase and
    cyclically time-shifted by (n-1) T / N; the flat scheme is the naive
    in-phase superposition (no weights, no shifts) used as the crest-factor
    baseline.  The result is normalized to unit peak, with the
    pre-normalization peak kept for comparisons.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if phase_scheme not in PHASE_SCHEMES:
        raise ValueError(f"phase_scheme must be one of {PHASE_SCHEMES}")
    nyquist_needed = 4.0 * params.total_span_hz
    if sample_rate_hz < nyquist_needed:
        raise ValueError(
            f"sample rate {sample_rate_hz:.3g} Hz undersamples the comb; "
            f"need >= 4 N delta = {nyquist_needed:.3g} Hz")
    t_prep = params.t_prep_s
    n_samples = int(round(t_prep * sample_rate_hz))
    t = np.arange(n_samples) / sample_rate_hz
    complex_out = variant == "complex_exponential"
    acc = np.zeros(n_samples, dtype=complex if complex_out else float)
    for n in range(1, params.n_teeth + 1):
        if phase_scheme == "schroeder":
            phi_n = schroeder_phase(n, params.n_teeth, floor_variant)
            tau = np.mod(t + (n - 1) * t_prep / params.n_teeth, t_prep)
            weight = np.exp(1j * phi_n) if complex_out else math.sin(phi_n)
        else:
            phi_n = 0.0
            tau = t
            weight = 1.0
        env, arg = _chs_envelope_and_arg(n, params, tau)
        acc += weight * (env * (np.exp(1j * arg) if complex_out else np.sin(arg)))
    peak = float(np.max(np.abs(acc)))
    if peak == 0.0:
        raise ValueError("synthesized waveform is identically zero")
    return AfcWaveform(samples=acc / peak, sample_rate_hz=sample_rate_hz,
                       params=params, variant=variant, prenorm_peak=peak)


def double_pass_transform(w: AfcWaveform) -> AfcWaveform:
    """Drive waveform for a double-pass modulator: sqrt magnitude, half phase.

    Halving a wrapped phase is discontinuous; the half-phase is made
    continuous by sign inversions per segment (equivalently, by halving the
    unwrapped phase), so that squaring the output reproduces the input.
    """
    z = np.asarray(w.samples, dtype=complex)
    theta = np.unwrap(np.angle(z))
    out = np.sqrt(np.abs(z)) * np.exp(0.5j * theta)
    return AfcWaveform(samples=out, sample_rate_hz=w.sample_rate_hz,
                       params=w.params, variant=w.variant,
                       prenorm_peak=w.prenorm_peak)


def square_waveform(w: AfcWaveform) -> AfcWaveform:
    """Square magnitude and double the phase (a double pass through the modulator)."""
    z = np.asarray(w.samples, dtype=complex)
    out = np.abs(z) ** 2 * np.exp(2j * np.angle(z))
    return AfcWaveform(samples=out, sample_rate_hz=w.sample_rate_hz,
                       params=w.params, variant=w.variant,
                       prenorm_peak=w.prenorm_peak)


@dataclass
class CombMetrics:
    tooth_freqs_hz: np.ndarray            # offsets from f0
    tooth_count: int
    spacing_estimate_hz: float
    in_tooth_energy_fraction: float
    crest_factor: float
    span_estimate_hz: float = field(init=False)

    def __post_init__(self):
        self.span_estimate_hz = (
            float(self.tooth_freqs_hz.max() - self.tooth_freqs_hz.min())
            + self.spacing_estimate_hz if len(self.tooth_freqs_hz) else 0.0)

    def to_dict(self) -> dict:
        return {
            "tooth_count": self.tooth_count,
            "spacing_estimate_hz": self.spacing_estimate_hz,
            "span_estimate_hz": self.span_estimate_hz,
            "in_tooth_energy_fraction": self.in_tooth_energy_fraction,
            "crest_factor": self.crest_factor,
        }


def crest_factor(samples: np.ndarray) -> float:
    """Peak magnitude over RMS magnitude."""
    mags = np.abs(np.asarray(samples))
    rms = float(np.sqrt(np.mean(mags ** 2)))
    if rms == 0:
        raise ValueError("zero waveform has no crest factor")
    return float(mags.max() / rms)


def comb_metrics(w: AfcWaveform, rel_peak_height: float = 0.01) -> CombMetrics:
    """Spectral tooth detection plus time-domain crest factor.

    Teeth are local maxima of the power spectrum above ``rel_peak_height``
    of the strongest peak, separated by at least half the expected spacing.
    """
    n = len(w.samples)
    delta = w.params.delta_hz
    if n / w.sample_rate_hz < 2.0 / delta:
        raise ValueError("waveform must cover at least two tooth-spacing periods")
    samples = np.asarray(w.samples)
    if np.isrealobj(samples) or np.allclose(samples.imag, 0.0):
        # a real waveform has a mirror-symmetric spectrum; use one side
        spectrum = np.fft.rfft(samples.real)
        freqs = np.fft.rfftfreq(n, d=1.0 / w.sample_rate_hz)
    else:
        spectrum = np.fft.fftshift(np.fft.fft(samples))
        freqs = np.fft.fftshift(np.fft.fftfreq(n, d=1.0 / w.sample_rate_hz))
    power = np.abs(spectrum) ** 2
    df = w.sample_rate_hz / n
    min_distance = max(1, int(0.5 * delta / df))
    peaks, _ = sp_signal.find_peaks(power, height=rel_peak_height * power.max(),
                                    distance=min_distance)
    if len(peaks) == 0:
        raise ValueError("degenerate spectrum: no teeth found")
    tooth_freqs = freqs[peaks] - w.params.f0_hz
    spacing = float(np.median(np.diff(tooth_freqs))) if len(peaks) > 1 else 0.0
    gamma = w.params.gamma_hz
    # windows may overlap, so accumulate a mask rather than summing per tooth
    sel_any = np.zeros(len(power), dtype=bool)
    for f in tooth_freqs:
        sel_any |= np.abs(freqs - w.params.f0_hz - f) <= gamma / 2.0
    fraction = float(power[sel_any].sum()) / float(power.sum())
    return CombMetrics(tooth_freqs_hz=np.sort(tooth_freqs),
                       tooth_count=len(peaks),
                       spacing_estimate_hz=spacing,
                       in_tooth_energy_fraction=fraction,
                       crest_factor=crest_factor(w.samples))
