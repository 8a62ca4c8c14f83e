"""Step-index fiber model of a photonic crystal fiber segment.

A PCF segment is reduced to an equivalent step-index fiber: a fused-silica
core of effective radius ``r`` inside a uniform cladding whose index is the
air-fraction-weighted average of silica and air,

    n_cl(lambda, f) = (1 - f) * n_silica(lambda) + f.

The guided fundamental mode is solved from the exact (full-vector) HE11
characteristic equation by default; the scalar weakly-guiding LP01 equation
is available for comparison via ``mode_model="lp01"``.  At the index
contrasts of interest here (n_co - n_cl ~ 0.13) the scalar approximation
misplaces the dispersion curve by enough to remove the anomalous-dispersion
window entirely, so it is not the default.

All frequency-domain math is done in SI units (rad/s, m); wavelengths in nm
and group quantities in ps/m, ps^2/m appear only at the interfaces.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.optimize import brentq, least_squares
from scipy.special import j0, j1, jv, k0, k1, kv

TWO_PI_C = 2.0 * math.pi * C_LIGHT

# Malitson three-term fit for fused silica, wavelength in um.
_SELLMEIER_B = (0.6961663, 0.4079426, 0.8974794)
_SELLMEIER_C_UM2 = (0.0684043**2, 0.1162414**2, 9.896161**2)

#: Validity window of the silica material model, nm.
WAVELENGTH_WINDOW_NM = (300.0, 2000.0)

_J0_FIRST_ZERO = 2.404825557695773
_J1_FIRST_ZERO = 3.8317059702075125

#: Relative step used for frequency-derivative stencils.
DERIV_REL_STEP = 1e-4


class DispersionDomainError(ValueError):
    """Wavelength (or a stencil point) left the material-model window."""


class ModeCutoffError(RuntimeError):
    """No guided fundamental mode was found."""


class ModeSolverError(RuntimeError):
    """Eigenvalue iteration failed; carries the last residual."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class StructureFitError(RuntimeError):
    """Structure fit did not converge; carries the best point seen."""

    def __init__(self, message: str, best_params: tuple[float, float], best_residual: float):
        super().__init__(message)
        self.best_params = best_params
        self.best_residual = best_residual


@dataclass(frozen=True)
class FiberSegment:
    """One homogeneous piece of PCF described by effective structure parameters."""

    label: str
    core_radius_nm: float
    air_fill: float
    length_m: float

    def __post_init__(self):
        if self.core_radius_nm <= 0:
            raise ValueError(f"core_radius_nm must be > 0, got {self.core_radius_nm}")
        if not 0.0 < self.air_fill < 1.0:
            raise ValueError(f"air_fill must be in (0, 1), got {self.air_fill}")
        if self.length_m <= 0:
            raise ValueError(f"length_m must be > 0, got {self.length_m}")


@dataclass(frozen=True)
class DispersionCurve:
    """Tabulated propagation constant k(lambda), either modelled or measured."""

    wavelength_nm: tuple[float, ...]
    k_rad_per_m: tuple[float, ...]
    provenance: str

    def __post_init__(self):
        wl = np.asarray(self.wavelength_nm, dtype=float)
        kk = np.asarray(self.k_rad_per_m, dtype=float)
        if wl.size != kk.size:
            raise ValueError("wavelength and k arrays must have the same length")
        if wl.size < 2 or np.any(np.diff(wl) <= 0):
            raise ValueError("wavelength samples must be strictly ascending")
        if np.any(kk <= 0):
            raise ValueError("k samples must be strictly positive")


@dataclass(frozen=True)
class GvdSample:
    """One measured group-velocity-dispersion point (fit input only)."""

    wavelength_nm: float
    beta2_ps2_per_m: float

    def __post_init__(self):
        if not (math.isfinite(self.wavelength_nm) and math.isfinite(self.beta2_ps2_per_m)):
            raise ValueError("GvdSample values must be finite")


def _check_window(wavelength_nm: float) -> None:
    lo, hi = WAVELENGTH_WINDOW_NM
    if not lo <= wavelength_nm <= hi:
        raise DispersionDomainError(
            f"wavelength {wavelength_nm:.3f} nm outside material-model window "
            f"[{lo:.0f}, {hi:.0f}] nm"
        )


def silica_refractive_index(wavelength_nm):
    """Refractive index of fused silica from the three-term Sellmeier fit.

    Accepts a scalar or array wavelength in nm; valid over
    ``WAVELENGTH_WINDOW_NM``.
    """
    wl = np.asarray(wavelength_nm, dtype=float)
    lo, hi = WAVELENGTH_WINDOW_NM
    if np.any(wl < lo) or np.any(wl > hi):
        bad = wl[(wl < lo) | (wl > hi)]
        raise DispersionDomainError(
            f"wavelength {np.atleast_1d(bad)[0]:.3f} nm outside material-model window "
            f"[{lo:.0f}, {hi:.0f}] nm"
        )
    x2 = (wl * 1e-3) ** 2  # um^2
    s = np.zeros_like(x2)
    for b, c2 in zip(_SELLMEIER_B, _SELLMEIER_C_UM2):
        s = s + b * x2 / (x2 - c2)
    n = np.sqrt(1.0 + s)
    return float(n) if np.isscalar(wavelength_nm) else n


def cladding_index(wavelength_nm, air_fill: float):
    """Effective cladding index: air-fraction-weighted average of silica and air."""
    if not 0.0 < air_fill < 1.0:
        raise ValueError(f"air_fill must be in (0, 1), got {air_fill}")
    return (1.0 - air_fill) * silica_refractive_index(wavelength_nm) + air_fill


def _he11_residual_arrays(u, v, nrat2, inv_kna2):
    """Vector HE11 characteristic residual, vectorized over u."""
    w = np.sqrt(v * v - u * u)
    a = (jv(0, u) - jv(1, u) / u) / (u * jv(1, u))
    b = -(kv(0, w) + kv(1, w) / w) / (w * kv(1, w))
    rhs = (1.0 - u * u * inv_kna2) * (v / (u * w)) ** 4
    return (a + b) * (a + nrat2 * b) - rhs


def _lp01_residual_arrays(u, v):
    """Scalar LP01 characteristic residual, vectorized over u."""
    w = np.sqrt(v * v - u * u)
    return u * j1(u) / j0(u) - w * k1(w) / k0(w)


def _bracketed_root(fun, grid):
    vals = fun(grid)
    sign = np.sign(vals)
    ok = np.isfinite(vals)
    for i in range(len(grid) - 1):
        if ok[i] and ok[i + 1] and sign[i] != 0 and sign[i] * sign[i + 1] < 0:
            return grid[i], grid[i + 1]
    return None


@functools.lru_cache(maxsize=200_000)
def _solve_neff(core_radius_nm: float, air_fill: float, wavelength_nm: float,
                mode_model: str) -> float:
    """Effective index of the fundamental mode at one wavelength."""
    _check_window(wavelength_nm)
    n_co = silica_refractive_index(wavelength_nm)
    n_cl = (1.0 - air_fill) * n_co + air_fill
    a_m = core_radius_nm * 1e-9
    k0_ = 2.0 * math.pi / (wavelength_nm * 1e-9)
    v = k0_ * a_m * math.sqrt(n_co * n_co - n_cl * n_cl)
    if v <= 0.0:
        raise ModeCutoffError("vanishing index contrast, no guided mode")

    if mode_model == "he11":
        nrat2 = (n_cl / n_co) ** 2
        inv_kna2 = 1.0 / (k0_ * n_co * a_m) ** 2
        fun = lambda u: _he11_residual_arrays(u, v, nrat2, inv_kna2)
        hi = min(v, _J1_FIRST_ZERO) * (1.0 - 1e-12)
    elif mode_model == "lp01":
        fun = lambda u: _lp01_residual_arrays(u, v)
        hi = min(v, _J0_FIRST_ZERO) * (1.0 - 1e-12)
    else:
        raise ValueError(f"unknown mode_model {mode_model!r}")

    bracket = _bracketed_root(fun, np.linspace(1e-3, hi, 129))
    if bracket is None:
        bracket = _bracketed_root(fun, np.linspace(1e-6, hi, 2049))
    if bracket is None:
        raise ModeCutoffError(
            f"no guided fundamental mode for r={core_radius_nm} nm, f={air_fill}, "
            f"lambda={wavelength_nm} nm (V={v:.3f})"
        )
    try:
        u = brentq(lambda x: float(fun(x)), bracket[0], bracket[1],
                   xtol=1e-15, rtol=4 * np.finfo(float).eps)
    except (RuntimeError, ValueError) as exc:  # pragma: no cover - defensive
        raise ModeSolverError(
            f"eigenvalue iteration failed at lambda={wavelength_nm} nm: {exc}",
            residual=float(fun(0.5 * (bracket[0] + bracket[1]))),
        ) from exc
    beta = math.sqrt((k0_ * n_co) ** 2 - (u / a_m) ** 2)
    return beta / k0_


def effective_index(segment: FiberSegment, wavelength_nm: float,
                    mode_model: str = "he11") -> float:
    """Fundamental-mode effective index; n_cl < n_eff < n_co."""
    return _solve_neff(segment.core_radius_nm, segment.air_fill,
                       float(wavelength_nm), mode_model)


def propagation_constant(segment: FiberSegment, wavelength_nm: float,
                         mode_model: str = "he11") -> float:
    """Propagation constant k = n_eff * 2*pi/lambda in rad/m."""
    n = effective_index(segment, wavelength_nm, mode_model)
    return n * 2.0 * math.pi / (wavelength_nm * 1e-9)


def _k_of_omega(core_radius_nm: float, air_fill: float, omega: float,
                mode_model: str) -> float:
    lam_nm = TWO_PI_C / omega * 1e9
    n = _solve_neff(core_radius_nm, air_fill, lam_nm, mode_model)
    return n * omega / C_LIGHT


def _slowness_rf(core_radius_nm, air_fill, omega, mode_model):
    # Richardson-extrapolated central difference; h/2 refinement built in.
    h = DERIV_REL_STEP * omega
    kp = _k_of_omega(core_radius_nm, air_fill, omega + h, mode_model)
    km = _k_of_omega(core_radius_nm, air_fill, omega - h, mode_model)
    kp2 = _k_of_omega(core_radius_nm, air_fill, omega + h / 2, mode_model)
    km2 = _k_of_omega(core_radius_nm, air_fill, omega - h / 2, mode_model)
    d1 = (kp - km) / (2 * h)
    d2 = (kp2 - km2) / h
    return (4 * d2 - d1) / 3


def _gvd_rf(core_radius_nm, air_fill, omega, mode_model):
    h = DERIV_REL_STEP * omega
    kc = _k_of_omega(core_radius_nm, air_fill, omega, mode_model)
    kp = _k_of_omega(core_radius_nm, air_fill, omega + h, mode_model)
    km = _k_of_omega(core_radius_nm, air_fill, omega - h, mode_model)
    kp2 = _k_of_omega(core_radius_nm, air_fill, omega + h / 2, mode_model)
    km2 = _k_of_omega(core_radius_nm, air_fill, omega - h / 2, mode_model)
    d1 = (kp - 2 * kc + km) / (h * h)
    d2 = (kp2 - 2 * kc + km2) / (h * h / 4)
    return (4 * d2 - d1) / 3  # s^2/m


def group_slowness(segment: FiberSegment, wavelength_nm: float,
                   mode_model: str = "he11") -> float:
    """Reciprocal group velocity dk/domega in s/m."""
    omega = TWO_PI_C / (wavelength_nm * 1e-9)
    # The widest stencil point must stay inside the material window.
    for off in (1 + DERIV_REL_STEP, 1 - DERIV_REL_STEP):
        _check_window(TWO_PI_C / (omega * off) * 1e9)
    return _slowness_rf(segment.core_radius_nm, segment.air_fill, omega, mode_model)


def gvd(segment: FiberSegment, wavelength_nm: float,
        mode_model: str = "he11") -> float:
    """Group-velocity dispersion beta2 = d^2k/domega^2 in ps^2/m."""
    omega = TWO_PI_C / (wavelength_nm * 1e-9)
    for off in (1 + DERIV_REL_STEP, 1 - DERIV_REL_STEP):
        _check_window(TWO_PI_C / (omega * off) * 1e9)
    return _gvd_rf(segment.core_radius_nm, segment.air_fill, omega, mode_model) * 1e24


def find_zdw(segment: FiberSegment, search_range_nm: tuple[float, float] = (900.0, 1250.0),
             mode_model: str = "he11", scan_step_nm: float = 1.0) -> list[float]:
    """All zero-dispersion wavelengths in the range, ascending, polished to 0.01 nm."""
    lo, hi = min(search_range_nm), max(search_range_nm)
    _check_window(lo)
    _check_window(hi)
    grid = np.arange(lo, hi + 0.5 * scan_step_nm, scan_step_nm)
    grid[-1] = min(grid[-1], hi)
    f = lambda lam: gvd(segment, float(lam), mode_model)
    vals = np.array([f(x) for x in grid])
    roots: list[float] = []
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(float(brentq(f, grid[i], grid[i + 1], xtol=1e-3)))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    return sorted(roots)


@dataclass(frozen=True)
class StructureFit:
    core_radius_nm: float
    air_fill: float
    residual: float  # final sum of squared beta2 misfits, (ps^2/m)^2


_FIT_BOUNDS = ((700.0, 0.10), (1300.0, 0.60))


def fit_structure(samples: list[GvdSample], initial_guess: tuple[float, float],
                  mode_model: str = "he11", max_nfev: int = 400) -> StructureFit:
    """Least-squares fit of (core radius, air fill) to tabulated GVD samples.

    Requires at least 6 samples whose beta2 values change sign (the data must
    span a zero-dispersion wavelength); deterministic for fixed inputs.
    """
    if len(samples) < 6:
        raise ValueError(f"need at least 6 GVD samples, got {len(samples)}")
    b2 = np.array([s.beta2_ps2_per_m for s in samples])
    if b2.min() >= 0 or b2.max() <= 0:
        raise ValueError("GVD samples must span a zero-dispersion wavelength (sign change)")
    r0, f0 = initial_guess
    (r_lo, f_lo), (r_hi, f_hi) = _FIT_BOUNDS
    if not (r_lo < r0 < r_hi and f_lo < f0 < f_hi):
        raise ValueError(f"initial guess {initial_guess} outside fit bounds {_FIT_BOUNDS}")
    wl = [s.wavelength_nm for s in samples]

    def residuals(x):
        r, f = x
        omegas = [TWO_PI_C / (w * 1e-9) for w in wl]
        model = [_gvd_rf(r, f, om, mode_model) * 1e24 for om in omegas]
        return np.array(model) - b2

    # diff_step must clear the mode-solver noise floor (~3e-7 ps^2/m) or the
    # Jacobian is garbage and the fit stalls at the initial guess.
    res = least_squares(
        residuals, x0=np.array([r0, f0]),
        bounds=([r_lo, f_lo], [r_hi, f_hi]),
        x_scale=(100.0, 0.05), diff_step=(1e-3, 2e-3),
        xtol=1e-12, ftol=1e-14, gtol=1e-14,
        max_nfev=max_nfev,
    )
    final = float(np.sum(res.fun**2))
    if not res.success:
        raise StructureFitError(
            f"structure fit did not converge: {res.message}",
            best_params=(float(res.x[0]), float(res.x[1])), best_residual=final,
        )
    return StructureFit(float(res.x[0]), float(res.x[1]), final)


def model_curve(segment: FiberSegment, wavelengths_nm, mode_model: str = "he11") -> DispersionCurve:
    """DispersionCurve sampled from the mode solver."""
    wl = [float(x) for x in wavelengths_nm]
    ks = [propagation_constant(segment, x, mode_model) for x in wl]
    return DispersionCurve(tuple(wl), tuple(ks), provenance=f"model({segment.label})")


def dispersion_table(segment: FiberSegment, wavelengths_nm, mode_model: str = "he11") -> dict:
    """Column dict for the dispersion CSV export."""
    wl = np.asarray(wavelengths_nm, dtype=float)
    n_eff = np.array([effective_index(segment, x, mode_model) for x in wl])
    k = n_eff * 2.0 * math.pi / (wl * 1e-9)
    k1_ = np.array([group_slowness(segment, x, mode_model) for x in wl]) * 1e12
    b2 = np.array([gvd(segment, x, mode_model) for x in wl])
    return {
        "wavelength_nm": wl,
        "n_eff": n_eff,
        "k_rad_per_m": k,
        "k1_ps_per_m": k1_,
        "beta2_ps2_per_m": b2,
    }


def read_gvd_csv(path) -> list[GvdSample]:
    """Read GVD samples from a `wavelength_nm,beta2_ps2_per_m` CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["wavelength_nm", "beta2_ps2_per_m"]:
            raise ValueError(
                f"unexpected GVD CSV header {header!r}; "
                "expected wavelength_nm,beta2_ps2_per_m"
            )
        return [GvdSample(float(row[0]), float(row[1])) for row in reader if row]
