"""Pump envelope, phase-matching functions, and joint spectral amplitude.

The two-photon amplitude factorizes into a Gaussian pump envelope and the
phase-matching function phi: f(w_s, w_i) = alpha(w_s + w_i) * phi(w_s, w_i).
For a uniform fiber phi is the familiar L*sinc(dk*L/2)*exp(i*dk*L/2); for a
spliced assembly the segments' contributions add coherently, each carrying
the phase accumulated in the segments before it:

    phi = sum_n L_n sinc(dk_n L_n / 2) exp(i dk_n L_n / 2)
                 * exp(i sum_{l<n} dk_l L_l).

Two mismatch models are provided: "linearized" (per-segment walk-off
expansion around the phase-matched pair, the default) and "full" (mismatch
re-evaluated from the dispersion curves at every grid point).
"""

from __future__ import annotations

import functools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .dispersion import TWO_PI_C, FiberSegment, _k_of_omega
from .phasematch import PhaseMatchPoint, PumpSpec, gaussian_sigma_omega, solve_phase_match

#: Default half-width of the signal window, in sinc lobes per segment.
DEFAULT_LOBES = 10.0
#: Default idler padding in pump-bandwidth units.
DEFAULT_PAD_SIGMAS = 4.0
#: Largest tolerated accumulated-phase change between adjacent grid samples.
MAX_EDGE_PHASE_STEP = math.pi / 8


class GridResolutionError(ValueError):
    """Grid too coarse to resolve the phase-matching oscillations."""

    def __init__(self, message: str, required_ns: int, required_ni: int):
        super().__init__(message)
        self.required_ns = required_ns
        self.required_ni = required_ni


class ZeroJsaError(ValueError):
    """The amplitude vanishes identically; correlations are undefined."""


@dataclass(frozen=True)
class AssemblySegment:
    """One spliced piece: its length, its mismatch linearization, and (for the
    full mismatch model) the structural fiber description."""

    length_m: float
    point: PhaseMatchPoint
    fiber: FiberSegment | None = None

    def __post_init__(self):
        if self.length_m <= 0:
            raise ValueError("segment length must be > 0")


@dataclass(frozen=True)
class AssemblySpec:
    """Ordered splice of homogeneous segments; order is physical order."""

    segments: tuple[AssemblySegment, ...]
    model_mode: str = "linearized"

    def __post_init__(self):
        if len(self.segments) < 1:
            raise ValueError("assembly needs at least one segment")
        if self.model_mode not in ("linearized", "full"):
            raise ValueError(f"unknown model_mode {self.model_mode!r}")
        pumps = [s.point.pump_wavelength_nm for s in self.segments]
        if self.model_mode == "linearized":
            ref = pumps[0]
            for p in pumps[1:]:
                if abs(p - ref) > 1e-9 * ref:
                    raise ValueError(
                        "linearized assembly segments must share one pump wavelength; "
                        f"got {ref} and {p} nm"
                    )
        if self.model_mode == "full" and any(s.fiber is None for s in self.segments):
            raise ValueError("full mismatch model needs structural fiber data per segment")

    @property
    def total_length_m(self) -> float:
        return float(sum(s.length_m for s in self.segments))

    @property
    def pump_wavelength_nm(self) -> float:
        return self.segments[0].point.pump_wavelength_nm


def assembly_from_fibers(fibers, pump: PumpSpec, model_mode: str = "linearized",
                         mode_model: str = "he11") -> AssemblySpec:
    """Solve the phase matching of each fiber at the pump and splice them."""
    segs = tuple(
        AssemblySegment(fb.length_m, solve_phase_match(fb, pump, mode_model=mode_model), fb)
        for fb in fibers
    )
    return AssemblySpec(segs, model_mode)


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform rectangular grid over signal x idler angular frequencies."""

    signal: np.ndarray  # rad/s, ascending, uniform
    idler: np.ndarray

    def __post_init__(self):
        for name, ax in (("signal", self.signal), ("idler", self.idler)):
            ax = np.asarray(ax, dtype=float)
            if ax.ndim != 1 or ax.size < 2:
                raise ValueError(f"{name} axis needs at least 2 points")
            d = np.diff(ax)
            if np.any(d <= 0):
                raise ValueError(f"{name} axis must be strictly ascending")
            if not np.allclose(d, d[0], rtol=1e-9, atol=0.0):
                raise ValueError(f"{name} axis must be uniformly spaced")
            object.__setattr__(self, name, ax)

    @property
    def signal_step(self) -> float:
        return float(self.signal[1] - self.signal[0])

    @property
    def idler_step(self) -> float:
        return float(self.idler[1] - self.idler[0])

    def trapezoid_weights(self) -> tuple[np.ndarray, np.ndarray]:
        ws = np.full(self.signal.size, self.signal_step)
        ws[0] = ws[-1] = self.signal_step / 2
        wi = np.full(self.idler.size, self.idler_step)
        wi[0] = wi[-1] = self.idler_step / 2
        return ws, wi

    def signal_wavelength_nm(self) -> np.ndarray:
        return TWO_PI_C / self.signal * 1e9

    def idler_wavelength_nm(self) -> np.ndarray:
        return TWO_PI_C / self.idler * 1e9


@dataclass(frozen=True)
class Spectrum1D:
    """Non-negative intensity samples over an ascending tagged axis."""

    axis: np.ndarray
    values: np.ndarray
    axis_kind: str  # "wavelength_nm" | "angular_frequency"
    normalization: str = "raw"  # "raw" | "peak"

    def __post_init__(self):
        ax = np.asarray(self.axis, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if ax.shape != vals.shape or ax.ndim != 1:
            raise ValueError("axis and values must be 1-D and the same length")
        if np.any(np.diff(ax) <= 0):
            raise ValueError("axis must be strictly ascending")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError("intensities must be finite and non-negative")
        if self.axis_kind not in ("wavelength_nm", "angular_frequency"):
            raise ValueError(f"unknown axis_kind {self.axis_kind!r}")
        if self.normalization not in ("raw", "peak"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        object.__setattr__(self, "axis", ax)
        object.__setattr__(self, "values", vals)

    def peak_normalized(self) -> "Spectrum1D":
        peak = self.values.max()
        if peak == 0:
            raise ZeroJsaError("cannot peak-normalize an all-zero spectrum")
        return Spectrum1D(self.axis, self.values / peak, self.axis_kind, "peak")

    def to_wavelength(self) -> "Spectrum1D":
        if self.axis_kind == "wavelength_nm":
            return self
        lam = TWO_PI_C / self.axis * 1e9
        return Spectrum1D(lam[::-1], self.values[::-1], "wavelength_nm", self.normalization)


@dataclass(frozen=True)
class FilterSpec:
    """Gaussian band-pass filter described by its center and intensity FWHM."""

    center_nm: float
    fwhm_nm: float

    def __post_init__(self):
        if self.center_nm <= 0 or self.fwhm_nm <= 0:
            raise ValueError("filter center and fwhm must be positive")

    @property
    def sigma_omega(self) -> float:
        """Width sigma_s of the transmission exp(-(w - w')^2 / sigma_s^2).

        The transmission is an intensity profile, so its FWHM obeys the same
        2*sigma*sqrt(ln 2) relation as the pump's intensity envelope.
        """
        return gaussian_sigma_omega(self.center_nm, self.fwhm_nm)


def pump_envelope(pump: PumpSpec, omega_s, omega_i):
    """Gaussian pump envelope exp(-(w_s + w_i - 2 w_pc)^2 / (4 sigma_p^2))."""
    det = np.asarray(omega_s) + np.asarray(omega_i) - 2.0 * pump.omega_pc
    return np.exp(-(det**2) / (4.0 * pump.sigma_omega**2))


def delta_k(point: PhaseMatchPoint, omega_s, omega_i):
    """Linearized mismatch tau_s*(w_s - w_s0) + tau_i*(w_i - w_i0), rad/m."""
    return point.tau_s_si * (np.asarray(omega_s) - point.omega_s0) \
        + point.tau_i_si * (np.asarray(omega_i) - point.omega_i0)


_SPLINE_QUANTUM = 1e12  # rad/s; snap spline ranges so repeat builds share caches


@functools.lru_cache(maxsize=64)
def _k_spline(core_radius_nm: float, air_fill: float, lo: float, hi: float,
              mode_model: str, n: int = 1024) -> CubicSpline:
    omegas = np.linspace(lo, hi, n)
    ks = np.array([_k_of_omega(core_radius_nm, air_fill, w, mode_model) for w in omegas])
    return CubicSpline(omegas, ks)


def delta_k_full(fiber: FiberSegment, omega_s, omega_i, mode_model: str = "he11"):
    """Mismatch 2k(w_p) - k(w_s) - k(w_i) with w_p = (w_s + w_i)/2, rad/m.

    k is evaluated through a cubic-spline cache of the mode solver; the spline
    range is the span of the requested frequencies, so out-of-window requests
    surface the material-model domain error.
    """
    ws = np.asarray(omega_s, dtype=float)
    wi = np.asarray(omega_i, dtype=float)
    wp = 0.5 * (ws + wi)
    lo = min(ws.min(), wi.min(), wp.min())
    hi = max(ws.max(), wi.max(), wp.max())
    lo_q = math.floor(lo / _SPLINE_QUANTUM - 1) * _SPLINE_QUANTUM
    hi_q = math.ceil(hi / _SPLINE_QUANTUM + 1) * _SPLINE_QUANTUM
    spl = _k_spline(fiber.core_radius_nm, fiber.air_fill, lo_q, hi_q, mode_model)
    return 2.0 * spl(wp) - spl(ws) - spl(wi)


def phi_homogeneous(length_m: float, dk):
    """Closed-form phase-matching function of a uniform fiber."""
    if length_m <= 0:
        raise ValueError("length must be > 0")
    x = np.asarray(dk) * length_m / 2.0
    return length_m * np.sinc(x / np.pi) * np.exp(1j * x)


def _segment_mismatches(assembly: AssemblySpec, omega_s, omega_i):
    for seg in assembly.segments:
        if assembly.model_mode == "linearized":
            yield seg, delta_k(seg.point, omega_s, omega_i)
        else:
            yield seg, delta_k_full(seg.fiber, omega_s, omega_i)


def phi_assembly(assembly: AssemblySpec, omega_s, omega_i):
    """Coherent sum of the segments' phase-matching contributions."""
    shape = np.broadcast_shapes(np.shape(omega_s), np.shape(omega_i))
    phi = np.zeros(shape, dtype=complex)
    acc = np.zeros(shape)
    for seg, dk in _segment_mismatches(assembly, omega_s, omega_i):
        x = dk * (seg.length_m / 2.0)
        phi = phi + seg.length_m * np.sinc(x / np.pi) * np.exp(1j * (x + acc))
        acc = acc + dk * seg.length_m
    return phi


def phi_signal(assembly: AssemblySpec, omega_s):
    """One-dimensional phase-matching function with the idler walk-off dropped.

    Valid in the asymmetric group-velocity-matched regime tau_i ~ 0, where the
    mismatch depends on the signal frequency alone; this is the quantity a
    narrow-band scan of the signal arm measures.
    """
    ws = np.asarray(omega_s, dtype=float)
    phi = np.zeros(ws.shape, dtype=complex)
    acc = np.zeros(ws.shape)
    for seg in assembly.segments:
        dk = seg.point.tau_s_si * (ws - seg.point.omega_s0)
        x = dk * (seg.length_m / 2.0)
        phi = phi + seg.length_m * np.sinc(x / np.pi) * np.exp(1j * (x + acc))
        acc = acc + dk * seg.length_m
    return phi


def _signal_window(assembly: AssemblySpec, lobes: float) -> tuple[float, float]:
    los, his = [], []
    for seg in assembly.segments:
        tau = abs(seg.point.tau_s_si)
        if tau == 0.0:
            raise ValueError("segment with tau_s = 0 has no finite signal window")
        half = lobes * 2.0 * math.pi / (tau * seg.length_m)
        los.append(seg.point.omega_s0 - half)
        his.append(seg.point.omega_s0 + half)
    return min(los), max(his)


def _required_points(span: float, phase_slope: float) -> int:
    # Sample so the accumulated phase changes by < pi/8 between neighbours.
    if phase_slope <= 0.0:
        return 2
    return int(math.ceil(span * phase_slope / MAX_EDGE_PHASE_STEP)) + 2


def default_grid(assembly: AssemblySpec, pump: PumpSpec, ns: int = 512, ni: int = 512,
                 lobes: float = DEFAULT_LOBES,
                 pad_sigmas: float = DEFAULT_PAD_SIGMAS) -> FrequencyGrid:
    """Auto-sized grid: union of per-segment sinc windows on the signal side,
    its energy-conservation mirror padded by the pump bandwidth on the idler
    side.  Point counts are raised if needed to satisfy the phase-step rule.
    """
    s_lo, s_hi = _signal_window(assembly, lobes)
    two_wp = 2.0 * pump.omega_pc
    i_lo = two_wp - s_hi - pad_sigmas * pump.sigma_omega
    i_hi = two_wp - s_lo + pad_sigmas * pump.sigma_omega
    slope_s = sum(abs(s.point.tau_s_si) * s.length_m for s in assembly.segments)
    slope_i = sum(abs(s.point.tau_i_si) * s.length_m for s in assembly.segments)
    ns = max(ns, _required_points(s_hi - s_lo, slope_s))
    ni = max(ni, _required_points(i_hi - i_lo, slope_i))
    return FrequencyGrid(np.linspace(s_lo, s_hi, ns), np.linspace(i_lo, i_hi, ni))


@dataclass(frozen=True)
class JsaGrid:
    """Joint spectral amplitude sampled on a frequency grid."""

    grid: FrequencyGrid
    amplitude: np.ndarray  # complex, shape (ns, ni)
    pump: PumpSpec
    assembly: AssemblySpec

    def __post_init__(self):
        amp = np.asarray(self.amplitude)
        if amp.shape != (self.grid.signal.size, self.grid.idler.size):
            raise ValueError("amplitude shape does not match the grid")
        if not np.all(np.isfinite(amp.real)) or not np.all(np.isfinite(amp.imag)):
            raise ValueError("amplitude must be finite everywhere")
        object.__setattr__(self, "amplitude", amp.astype(complex, copy=False))

    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2


def _check_resolution(assembly: AssemblySpec, grid: FrequencyGrid) -> None:
    slope_s = sum(abs(s.point.tau_s_si) * s.length_m for s in assembly.segments)
    slope_i = sum(abs(s.point.tau_i_si) * s.length_m for s in assembly.segments)
    step_s = slope_s * grid.signal_step
    step_i = slope_i * grid.idler_step
    if step_s > MAX_EDGE_PHASE_STEP or step_i > MAX_EDGE_PHASE_STEP:
        span_s = grid.signal[-1] - grid.signal[0]
        span_i = grid.idler[-1] - grid.idler[0]
        raise GridResolutionError(
            "grid too coarse for the accumulated phase: "
            f"signal step {step_s:.3f} rad, idler step {step_i:.3f} rad "
            f"(limit {MAX_EDGE_PHASE_STEP:.3f})",
            required_ns=_required_points(span_s, slope_s),
            required_ni=_required_points(span_i, slope_i),
        )


def build_jsa(assembly: AssemblySpec, pump: PumpSpec, grid: FrequencyGrid | None = None,
              ns: int = 512, ni: int = 512, lobes: float = DEFAULT_LOBES,
              pad_sigmas: float = DEFAULT_PAD_SIGMAS, threads: int = 1) -> JsaGrid:
    """Sample alpha * phi on the grid (auto-sized when not supplied)."""
    if grid is None:
        grid = default_grid(assembly, pump, ns, ni, lobes, pad_sigmas)
    _check_resolution(assembly, grid)
    ws = grid.signal[:, None]
    wi = grid.idler[None, :]

    def rows(block: slice) -> np.ndarray:
        return pump_envelope(pump, ws[block], wi) * phi_assembly(assembly, ws[block], wi)

    if threads <= 1:
        amp = rows(slice(None))
    else:
        amp = np.empty((grid.signal.size, grid.idler.size), dtype=complex)
        nblocks = threads * 4
        edges = np.linspace(0, grid.signal.size, nblocks + 1).astype(int)
        blocks = [slice(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for block, result in zip(blocks, pool.map(rows, blocks)):
                amp[block] = result
    return JsaGrid(grid, amp, pump, assembly)


def marginal(jsa: JsaGrid, axis: str = "signal") -> Spectrum1D:
    """Trapezoid projection of the intensity onto one frequency axis."""
    if axis not in ("signal", "idler"):
        raise ValueError(f"axis must be 'signal' or 'idler', got {axis!r}")
    w_s, w_i = jsa.grid.trapezoid_weights()
    intensity = jsa.intensity()
    if axis == "signal":
        vals = intensity @ w_i
        ax = jsa.grid.signal
    else:
        vals = w_s @ intensity
        ax = jsa.grid.idler
    return Spectrum1D(ax, vals, "angular_frequency", "raw")


def _scan_quadrature(axis: np.ndarray, intensity: np.ndarray, sigma: float,
                     centers_omega: np.ndarray, scale: float) -> np.ndarray:
    step = np.diff(axis)
    w = np.empty_like(axis)
    w[0] = step[0] / 2
    w[-1] = step[-1] / 2
    w[1:-1] = (step[:-1] + step[1:]) / 2
    weighted = w * intensity
    out = np.empty(centers_omega.size)
    for a in range(0, centers_omega.size, 64):  # bound the kernel matrix size
        block = centers_omega[a:a + 64]
        gauss = np.exp(-((axis[None, :] - block[:, None]) ** 2) / sigma**2)
        out[a:a + 64] = gauss @ weighted
    return scale * out


def filter_scan(target, filt: FilterSpec, centers_nm, pump: PumpSpec | None = None,
                lobes: float = DEFAULT_LOBES) -> Spectrum1D:
    """Counting rate of a Gaussian-filtered signal arm versus filter center.

    ``target`` is either a JsaGrid (the filtered quantity is the signal
    marginal divided by the pump's sqrt(2 pi) sigma_p, exact in the
    group-matched regime) or an AssemblySpec (the one-dimensional
    phase-matching spectrum is evaluated directly on an internally refined
    axis).  The overall scale is gamma^2 P^2 / sigma_p when pump gain data is
    available, 1 otherwise.
    """
    centers = np.asarray(centers_nm, dtype=float)
    if centers.ndim != 1 or np.any(np.diff(centers) <= 0):
        raise ValueError("filter centers must be a strictly ascending 1-D list, nm")
    centers_omega = TWO_PI_C / (centers * 1e-9)
    sigma = filt.sigma_omega

    if isinstance(target, JsaGrid):
        pump = target.pump
        spec = marginal(target, "signal")
        axis = spec.axis
        intensity = spec.values / (math.sqrt(2.0 * math.pi) * pump.sigma_omega)
        lo, hi = axis[0], axis[-1]
        outside = (centers_omega < lo) | (centers_omega > hi)
        if np.any(outside):
            warnings.warn(
                f"{int(outside.sum())} filter centers outside the grid support; "
                "their scan values are zero", stacklevel=2,
            )
    elif isinstance(target, AssemblySpec):
        s_lo, s_hi = _signal_window(target, lobes)
        lo = min(s_lo, centers_omega.min() - 6 * sigma)
        hi = max(s_hi, centers_omega.max() + 6 * sigma)
        slope = sum(abs(s.point.tau_s_si) * s.length_m for s in target.segments)
        n = max(_required_points(hi - lo, slope), int(math.ceil((hi - lo) / (sigma / 3))) + 1)
        n = min(max(n, 2048), 1 << 18)
        axis = np.linspace(lo, hi, n)
        intensity = np.abs(phi_signal(target, axis)) ** 2
        outside = np.zeros(centers.shape, dtype=bool)
    else:
        raise TypeError(f"target must be JsaGrid or AssemblySpec, got {type(target)!r}")

    scale = 1.0
    if pump is not None and pump.gain is not None:
        scale = pump.gain**2 / pump.sigma_omega
    vals = _scan_quadrature(axis, intensity, sigma, centers_omega, scale)
    vals[outside] = 0.0
    # Order follows ascending wavelength; the omega centers descend.
    return Spectrum1D(centers, vals, "wavelength_nm", "raw")
