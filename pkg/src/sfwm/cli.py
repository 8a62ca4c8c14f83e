"""Config-driven command line front end.

One JSON config file describes the pump, the segment catalog, and the
numerical settings; subcommands pick out what they need.  Outputs are CSV
files (12 significant digits, comma separator) plus a manifest recording the
config hash, library versions, and the grid actually used, so identical
configs always reproduce byte-identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .correlation import g2_quadrature, g2_table, schmidt_decompose
from .dispersion import (
    TWO_PI_C,
    FiberSegment,
    dispersion_table,
    find_zdw,
    fit_structure,
    read_gvd_csv,
)
from .phasematch import PhaseMatchPoint, PumpSpec, agvm_roots, gvm_curve, solve_phase_match
from .planner import SegmentPool, plan_exhaustive
from .spectra import (
    AssemblySegment,
    AssemblySpec,
    FilterSpec,
    FrequencyGrid,
    build_jsa,
    filter_scan,
    marginal,
)

SUBCOMMANDS = (
    "dispersion", "fit", "phasematch", "gvm-curve", "jsa", "marginal",
    "filter-scan", "g2", "g2-table", "plan",
)


class ConfigError(ValueError):
    """Config rejected before any computation; message names the field."""


def _fmt(x: float) -> str:
    return f"{float(x):.12g}"


# ---------------------------------------------------------------------------
# schema validation


def _require(obj: dict, field: str, path: str):
    if field not in obj:
        raise ConfigError(f"missing required field {path}.{field}")
    return obj[field]


def _check_keys(obj: dict, allowed: set[str], path: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path} must be an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown field {path}.{sorted(unknown)[0]}")


def _number(obj: dict, field: str, path: str, *, lo=None, hi=None, required=True,
            default=None, lo_open=False, hi_open=False):
    if field not in obj:
        if required:
            raise ConfigError(f"missing required field {path}.{field}")
        return default
    val = obj[field]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}.{field} must be a number")
    val = float(val)
    if lo is not None and (val < lo or (lo_open and val == lo)):
        raise ConfigError(f"{path}.{field} = {val} violates {'>' if lo_open else '>='} {lo}")
    if hi is not None and (val > hi or (hi_open and val == hi)):
        raise ConfigError(f"{path}.{field} = {val} violates {'<' if hi_open else '<='} {hi}")
    return val


def _int_field(obj, field, path, *, lo=1, required=False, default=None):
    if field not in obj:
        if required:
            raise ConfigError(f"missing required field {path}.{field}")
        return default
    val = obj[field]
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{path}.{field} must be an integer")
    if val < lo:
        raise ConfigError(f"{path}.{field} = {val} violates >= {lo}")
    return val


def _range_field(obj, field, path, required=False, default=None):
    if field not in obj:
        if required:
            raise ConfigError(f"missing required field {path}.{field}")
        return default
    val = obj[field]
    if (not isinstance(val, list) or len(val) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in val)):
        raise ConfigError(f"{path}.{field} must be a [low, high] number pair")
    lo, hi = float(val[0]), float(val[1])
    if lo >= hi:
        raise ConfigError(f"{path}.{field} must satisfy low < high")
    return (lo, hi)


@dataclass
class SegmentEntry:
    label: str
    length_m: float
    core_radius_nm: float | None
    air_fill: float | None
    override: dict | None  # validated phase_match block

    def fiber(self, length_m: float | None = None) -> FiberSegment:
        if self.core_radius_nm is None or self.air_fill is None:
            raise ConfigError(
                f"segment {self.label!r} needs core_radius_nm and air_fill for this command"
            )
        return FiberSegment(self.label, self.core_radius_nm, self.air_fill,
                            length_m if length_m is not None else self.length_m)


@dataclass
class RunConfig:
    pump: PumpSpec | None
    segments: dict[str, SegmentEntry]
    segment_order: list[str]
    assembly: list[tuple[str, float | None]] | None
    assemblies: list[tuple[str, list[tuple[str, float | None]]]] | None
    pump_fwhms_nm: list[float] | None
    grid: dict
    model: str
    filt: dict | None
    planner: dict | None
    fit: dict | None
    sweep: dict | None
    dispersion: dict
    output_dir: str
    raw_sha256: str


_TOP_KEYS = {
    "pump", "segments", "assembly", "assemblies", "pump_fwhms_nm", "grid",
    "model", "filter", "planner", "fit", "sweep", "dispersion", "output_dir",
}


def _parse_assembly_elems(val, path: str) -> list[tuple[str, float | None]]:
    if not isinstance(val, list) or not val:
        raise ConfigError(f"{path} must be a non-empty list")
    out = []
    for i, elem in enumerate(val):
        if isinstance(elem, str):
            out.append((elem, None))
        elif isinstance(elem, dict):
            _check_keys(elem, {"label", "length_m"}, f"{path}[{i}]")
            label = _require(elem, "label", f"{path}[{i}]")
            if not isinstance(label, str):
                raise ConfigError(f"{path}[{i}].label must be a string")
            length = _number(elem, "length_m", f"{path}[{i}]", lo=0, lo_open=True,
                             required=False)
            out.append((label, length))
        else:
            raise ConfigError(f"{path}[{i}] must be a label or an object")
    return out


def load_config(path) -> RunConfig:
    raw = Path(path).read_bytes()
    sha = hashlib.sha256(raw).hexdigest()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _check_keys(data, _TOP_KEYS, "config")

    pump = None
    if "pump" in data:
        p = data["pump"]
        _check_keys(p, {"center_wavelength_nm", "fwhm_nm", "gamma_per_w_km",
                        "peak_power_w"}, "pump")
        pump = PumpSpec(
            center_wavelength_nm=_number(p, "center_wavelength_nm", "pump", lo=0, lo_open=True),
            fwhm_nm=_number(p, "fwhm_nm", "pump", lo=0, lo_open=True),
            gamma_per_w_km=_number(p, "gamma_per_w_km", "pump", lo=0, required=False),
            peak_power_w=_number(p, "peak_power_w", "pump", lo=0, required=False),
        )

    segments: dict[str, SegmentEntry] = {}
    order: list[str] = []
    for i, seg in enumerate(data.get("segments", [])):
        path_i = f"segments[{i}]"
        _check_keys(seg, {"label", "core_radius_nm", "air_fill", "length_m",
                          "phase_match"}, path_i)
        label = _require(seg, "label", path_i)
        if not isinstance(label, str) or not label:
            raise ConfigError(f"{path_i}.label must be a non-empty string")
        if label in segments:
            raise ConfigError(f"duplicate segment label {label!r} at {path_i}")
        entry = SegmentEntry(
            label=label,
            length_m=_number(seg, "length_m", path_i, lo=0, lo_open=True),
            core_radius_nm=_number(seg, "core_radius_nm", path_i, lo=0, lo_open=True,
                                   required=False),
            air_fill=_number(seg, "air_fill", path_i, lo=0, hi=1, lo_open=True,
                             hi_open=True, required=False),
            override=None,
        )
        if "phase_match" in seg:
            pm = seg["phase_match"]
            _check_keys(pm, {"lambda_s0_nm", "lambda_i0_nm", "tau_s_ps_per_m",
                             "theta_rad", "tau_i_sign"}, f"{path_i}.phase_match")
            override = {
                "lambda_s0_nm": _number(pm, "lambda_s0_nm", f"{path_i}.phase_match",
                                        lo=0, lo_open=True),
                "lambda_i0_nm": _number(pm, "lambda_i0_nm", f"{path_i}.phase_match",
                                        lo=0, lo_open=True, required=False),
                "tau_s_ps_per_m": _number(pm, "tau_s_ps_per_m", f"{path_i}.phase_match"),
                "theta_rad": _number(pm, "theta_rad", f"{path_i}.phase_match",
                                     lo=0, hi=math.pi / 2),
                "tau_i_sign": _number(pm, "tau_i_sign", f"{path_i}.phase_match",
                                      required=False, default=1.0),
            }
            if override["tau_i_sign"] not in (-1.0, 1.0):
                raise ConfigError(f"{path_i}.phase_match.tau_i_sign must be +1 or -1")
            entry.override = override
        segments[label] = entry
        order.append(label)

    assembly = None
    if "assembly" in data:
        assembly = _parse_assembly_elems(data["assembly"], "assembly")
    assemblies = None
    if "assemblies" in data:
        if not isinstance(data["assemblies"], list) or not data["assemblies"]:
            raise ConfigError("assemblies must be a non-empty list")
        assemblies = []
        for i, item in enumerate(data["assemblies"]):
            _check_keys(item, {"name", "segments"}, f"assemblies[{i}]")
            name = _require(item, "name", f"assemblies[{i}]")
            if not isinstance(name, str) or not name:
                raise ConfigError(f"assemblies[{i}].name must be a non-empty string")
            elems = _parse_assembly_elems(_require(item, "segments", f"assemblies[{i}]"),
                                          f"assemblies[{i}].segments")
            assemblies.append((name, elems))
        names = [n for n, _ in assemblies]
        if len(set(names)) != len(names):
            raise ConfigError("assemblies names must be unique")

    fwhms = None
    if "pump_fwhms_nm" in data:
        val = data["pump_fwhms_nm"]
        if (not isinstance(val, list) or not val
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0
                       for v in val)):
            raise ConfigError("pump_fwhms_nm must be a non-empty list of positive numbers")
        fwhms = [float(v) for v in val]

    grid = {}
    if "grid" in data:
        g = data["grid"]
        _check_keys(g, {"ns", "ni", "signal_range_nm", "idler_range_nm",
                        "lobes", "pad_sigmas"}, "grid")
        grid = {
            "ns": _int_field(g, "ns", "grid", lo=2, default=512),
            "ni": _int_field(g, "ni", "grid", lo=2, default=512),
            "signal_range_nm": _range_field(g, "signal_range_nm", "grid"),
            "idler_range_nm": _range_field(g, "idler_range_nm", "grid"),
            "lobes": _number(g, "lobes", "grid", lo=0.5, required=False, default=None),
            "pad_sigmas": _number(g, "pad_sigmas", "grid", lo=0, required=False,
                                  default=None),
        }
        if (grid["signal_range_nm"] is None) != (grid["idler_range_nm"] is None):
            raise ConfigError("grid.signal_range_nm and grid.idler_range_nm "
                              "must be given together")
    grid.setdefault("ns", 512)
    grid.setdefault("ni", 512)
    grid.setdefault("signal_range_nm", None)
    grid.setdefault("idler_range_nm", None)
    grid.setdefault("lobes", None)
    grid.setdefault("pad_sigmas", None)

    model = data.get("model", "linearized")
    if model not in ("linearized", "full"):
        raise ConfigError('model must be "linearized" or "full"')

    filt = None
    if "filter" in data:
        fdict = data["filter"]
        _check_keys(fdict, {"center_nm", "fwhm_nm", "centers_nm", "scan_range_nm",
                            "n_centers"}, "filter")
        filt = {
            "center_nm": _number(fdict, "center_nm", "filter", lo=0, lo_open=True,
                                 required=False),
            "fwhm_nm": _number(fdict, "fwhm_nm", "filter", lo=0, lo_open=True),
            "centers_nm": None,
            "scan_range_nm": _range_field(fdict, "scan_range_nm", "filter"),
            "n_centers": _int_field(fdict, "n_centers", "filter", lo=2, default=201),
        }
        if "centers_nm" in fdict:
            val = fdict["centers_nm"]
            if (not isinstance(val, list) or len(val) < 1
                    or any(isinstance(v, bool) or not isinstance(v, (int, float))
                           for v in val)):
                raise ConfigError("filter.centers_nm must be a list of numbers")
            centers = [float(v) for v in val]
            if any(b <= a for a, b in zip(centers, centers[1:])):
                raise ConfigError("filter.centers_nm must be strictly ascending")
            filt["centers_nm"] = centers

    planner = None
    if "planner" in data:
        pl = data["planner"]
        _check_keys(pl, {"target_total_length_m", "tolerance_m", "max_segments",
                         "max_plans"}, "planner")
        planner = {
            "target_total_length_m": _number(pl, "target_total_length_m", "planner",
                                             lo=0, lo_open=True),
            "tolerance_m": _number(pl, "tolerance_m", "planner", lo=0, required=False),
            "max_segments": _int_field(pl, "max_segments", "planner"),
            "max_plans": _int_field(pl, "max_plans", "planner", default=100_000),
        }

    fit = None
    if "fit" in data:
        fdict = data["fit"]
        _check_keys(fdict, {"gvd_csv", "initial_core_radius_nm", "initial_air_fill"},
                    "fit")
        gvd_csv = _require(fdict, "gvd_csv", "fit")
        if not isinstance(gvd_csv, str):
            raise ConfigError("fit.gvd_csv must be a path string")
        fit = {
            "gvd_csv": gvd_csv,
            "initial_core_radius_nm": _number(fdict, "initial_core_radius_nm", "fit",
                                              lo=0, lo_open=True),
            "initial_air_fill": _number(fdict, "initial_air_fill", "fit", lo=0, hi=1,
                                        lo_open=True, hi_open=True),
        }

    sweep = None
    if "sweep" in data:
        s = data["sweep"]
        _check_keys(s, {"pump_range_nm", "n_points", "segment_label"}, "sweep")
        sweep = {
            "pump_range_nm": _range_field(s, "pump_range_nm", "sweep", required=True),
            "n_points": _int_field(s, "n_points", "sweep", lo=2, required=True),
            "segment_label": s.get("segment_label"),
        }
        if sweep["segment_label"] is not None and not isinstance(sweep["segment_label"], str):
            raise ConfigError("sweep.segment_label must be a string")

    disp = {"wavelength_range_nm": (850.0, 1450.0), "n_points": 121,
            "zdw_search_nm": (900.0, 1250.0)}
    if "dispersion" in data:
        d = data["dispersion"]
        _check_keys(d, {"wavelength_range_nm", "n_points", "zdw_search_nm"}, "dispersion")
        disp["wavelength_range_nm"] = _range_field(
            d, "wavelength_range_nm", "dispersion", default=disp["wavelength_range_nm"])
        disp["n_points"] = _int_field(d, "n_points", "dispersion", lo=2, default=121)
        disp["zdw_search_nm"] = _range_field(
            d, "zdw_search_nm", "dispersion", default=disp["zdw_search_nm"])

    out_dir = data.get("output_dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("output_dir must be a non-empty path string")

    return RunConfig(
        pump=pump, segments=segments, segment_order=order, assembly=assembly,
        assemblies=assemblies, pump_fwhms_nm=fwhms, grid=grid, model=model,
        filt=filt, planner=planner, fit=fit, sweep=sweep, dispersion=disp,
        output_dir=out_dir, raw_sha256=sha,
    )


# ---------------------------------------------------------------------------
# assembly construction


def _point_for(entry: SegmentEntry, pump: PumpSpec, model: str) -> PhaseMatchPoint:
    if entry.override is not None:
        ov = entry.override
        pt = PhaseMatchPoint.from_signal_and_angle(
            pump.center_wavelength_nm, ov["lambda_s0_nm"], ov["tau_s_ps_per_m"],
            ov["theta_rad"], ov["tau_i_sign"],
        )
        if ov["lambda_i0_nm"] is not None:
            if abs(ov["lambda_i0_nm"] - pt.lambda_i0_nm) > 1e-9 * pt.lambda_i0_nm:
                raise ConfigError(
                    "phase_match.lambda_i0_nm breaks energy conservation: "
                    f"expected {pt.lambda_i0_nm!r} from lambda_s0_nm, "
                    f"got {ov['lambda_i0_nm']!r}; omit it to derive it"
                )
        return pt
    return solve_phase_match(entry.fiber(), pump)


def _build_assembly(cfg: RunConfig, elems, pump: PumpSpec) -> AssemblySpec:
    segs = []
    for label, length in elems:
        if label not in cfg.segments:
            raise ConfigError(f"assembly references unknown segment label {label!r}")
        entry = cfg.segments[label]
        seg_len = length if length is not None else entry.length_m
        point = _point_for(entry, pump, cfg.model)
        fiber = None
        if entry.core_radius_nm is not None and entry.air_fill is not None:
            fiber = entry.fiber(seg_len)
        if cfg.model == "full" and fiber is None:
            raise ConfigError(
                f"model 'full' needs core_radius_nm/air_fill on segment {label!r}")
        segs.append(AssemblySegment(seg_len, point, fiber))
    return AssemblySpec(tuple(segs), cfg.model)


def _named_assemblies(cfg: RunConfig, pump: PumpSpec) -> list[tuple[str, AssemblySpec]]:
    if cfg.assembly is not None:
        name = "+".join(label for label, _ in cfg.assembly)
        return [(name, _build_assembly(cfg, cfg.assembly, pump))]
    if cfg.assemblies is not None:
        return [(name, _build_assembly(cfg, elems, pump))
                for name, elems in cfg.assemblies]
    if cfg.segment_order:
        elems = [(label, None) for label in cfg.segment_order]
        return [("+".join(cfg.segment_order), _build_assembly(cfg, elems, pump))]
    raise ConfigError("config defines no segments, assembly, or assemblies")


def _explicit_grid(cfg: RunConfig) -> FrequencyGrid | None:
    s_rng = cfg.grid["signal_range_nm"]
    i_rng = cfg.grid["idler_range_nm"]
    if s_rng is None:
        return None
    # Endpoints are given in nm; the axes themselves are uniform in omega.
    def axis(rng, n):
        w_hi = TWO_PI_C / (rng[0] * 1e-9)
        w_lo = TWO_PI_C / (rng[1] * 1e-9)
        return np.linspace(w_lo, w_hi, n)
    return FrequencyGrid(axis(s_rng, cfg.grid["ns"]), axis(i_rng, cfg.grid["ni"]))


def _grid_kwargs(cfg: RunConfig) -> dict:
    kw = {}
    if cfg.grid["lobes"] is not None:
        kw["lobes"] = cfg.grid["lobes"]
    if cfg.grid["pad_sigmas"] is not None:
        kw["pad_sigmas"] = cfg.grid["pad_sigmas"]
    return kw


def _require_pump(cfg: RunConfig) -> PumpSpec:
    if cfg.pump is None:
        raise ConfigError("missing required field pump")
    return cfg.pump


# ---------------------------------------------------------------------------
# output helpers


class _OutputSet:
    """Collects rendered files, then writes them all at once."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: dict[str, str] = {}

    def add_csv(self, name: str, header: list[str], rows) -> None:
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join("" if v is None else (v if isinstance(v, str) else _fmt(v))
                                  for v in row))
        self.files[name] = "\n".join(lines) + "\n"

    def add_text(self, name: str, text: str) -> None:
        self.files[name] = text

    def add_json(self, name: str, obj) -> None:
        self.files[name] = json.dumps(obj, sort_keys=True, indent=2) + "\n"

    def write_all(self, manifest: dict) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        manifest = dict(manifest, outputs=sorted(self.files))
        self.files["manifest.json"] = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
        for name in sorted(self.files):
            (self.out_dir / name).write_text(self.files[name])


def _grid_record(grid: FrequencyGrid) -> dict:
    return {
        "ns": int(grid.signal.size),
        "ni": int(grid.idler.size),
        "signal_rad_per_s": [grid.signal[0], grid.signal[-1]],
        "idler_rad_per_s": [grid.idler[0], grid.idler[-1]],
        "signal_nm": [TWO_PI_C / grid.signal[-1] * 1e9, TWO_PI_C / grid.signal[0] * 1e9],
        "idler_nm": [TWO_PI_C / grid.idler[-1] * 1e9, TWO_PI_C / grid.idler[0] * 1e9],
    }


def _pump_record(pump: PumpSpec) -> dict:
    return {
        "center_wavelength_nm": pump.center_wavelength_nm,
        "fwhm_nm": pump.fwhm_nm,
        "sigma_rad_per_s": pump.sigma_omega,
        "gamma_per_w_km": pump.gamma_per_w_km,
        "peak_power_w": pump.peak_power_w,
    }


def _assembly_record(name: str, assembly: AssemblySpec) -> dict:
    return {
        "name": name,
        "model_mode": assembly.model_mode,
        "total_length_m": assembly.total_length_m,
        "segments": [
            {
                "length_m": seg.length_m,
                "lambda_s0_nm": seg.point.lambda_s0_nm,
                "lambda_i0_nm": seg.point.lambda_i0_nm,
                "tau_s_ps_per_m": seg.point.tau_s_ps_per_m,
                "tau_i_ps_per_m": seg.point.tau_i_ps_per_m,
                "theta_rad": seg.point.theta_rad,
                "fiber": None if seg.fiber is None else {
                    "label": seg.fiber.label,
                    "core_radius_nm": seg.fiber.core_radius_nm,
                    "air_fill": seg.fiber.air_fill,
                },
            }
            for seg in assembly.segments
        ],
    }


def _spectrum_rows(spectrum) -> list[tuple[float, float]]:
    wl = spectrum.to_wavelength()
    return list(zip(wl.axis, wl.values))


# ---------------------------------------------------------------------------
# subcommand handlers (compute everything, then write)


def _suffix(name: str, multi: bool) -> str:
    if not multi:
        return ""
    safe = "".join(ch if ch.isalnum() else "_" for ch in name)
    return f"_{safe}"


def _cmd_dispersion(cfg: RunConfig, out: _OutputSet, threads: int) -> dict:
    if not cfg.segment_order:
        raise ConfigError("dispersion needs a segments list")
    lo, hi = cfg.dispersion["wavelength_range_nm"]
    wl = np.linspace(lo, hi, cfg.dispersion["n_points"])
    zdw_rows = []
    for label in cfg.segment_order:
        fiber = cfg.segments[label].fiber()
        table = dispersion_table(fiber, wl)
        out.add_csv(
            f"dispersion_{label}.csv",
            ["wavelength_nm", "n_eff", "k_rad_per_m", "k1_ps_per_m", "beta2_ps2_per_m"],
            zip(table["wavelength_nm"], table["n_eff"], table["k_rad_per_m"],
                table["k1_ps_per_m"], table["beta2_ps2_per_m"]),
        )
        for z in find_zdw(fiber, cfg.dispersion["zdw_search_nm"]):
            zdw_rows.append((label, z))
    out.add_csv("zdw.csv", ["label", "zdw_nm"], zdw_rows)
    return {}


def _cmd_fit(cfg: RunConfig, out: _OutputSet, threads: int) -> dict:
    if cfg.fit is None:
        raise ConfigError("missing required field fit")
    samples = read_gvd_csv(cfg.fit["gvd_csv"])
    result = fit_structure(
        samples,
        (cfg.fit["initial_core_radius_nm"], cfg.fit["initial_air_fill"]),
    )
    out.add_csv("fit.csv", ["core_radius_nm", "air_fill", "residual"],
                [(result.core_radius_nm, result.air_fill, result.residual)])
    return {}


def _cmd_phasematch(cfg: RunConfig, out: _OutputSet, threads: int) -> dict:
    pump = _require_pump(cfg)
    if not cfg.segment_order:
        raise ConfigError("phasematch needs a segments list")
    rows = []
    for label in cfg.segment_order:
        entry = cfg.segments[label]
        fiber = entry.fiber()
        pt = solve_phase_match(fiber, pump)
        rows.append((label, fiber.core_radius_nm, fiber.air_fill, fiber.length_m,
                     pt.lambda_s0_nm, pt.lambda_i0_nm, pt.tau_s_ps_per_m,
                     pt.tau_i_ps_per_m, pt.theta_rad))
    out.add_csv(
        "phasematch.csv",
        ["label", "core_radius_nm", "air_fill", "length_m", "lambda_s0_nm",
         "lambda_i0_nm", "tau_s_ps_per_m", "tau_i_ps_per_m", "theta_rad"],
        rows,
    )
    return {}


def _cmd_gvm_curve(cfg: RunConfig, out: _OutputSet, threads: int) -> dict:
    if cfg.sweep is None:
        raise ConfigError("missing required field sweep")
    label = cfg.sweep["segment_label"] or (cfg.segment_order[0] if cfg.segment_order else None)
    if label is None or label not in cfg.segments:
        raise ConfigError("sweep.segment_label missing or unknown")
    fiber = cfg.segments[label].fiber()
    curve = gvm_curve(fiber, cfg.sweep["pump_range_nm"], cfg.sweep["n_points"])
    rows = []
    for sample in curve:
        if sample.point is None:
            rows.append((sample.lambda_p_nm, None, None, None, None, None))
        else:
            pt = sample.point
            rows.append((sample.lambda_p_nm, pt.lambda_s0_nm, pt.lambda_i0_nm,
                         pt.tau_s_ps_per_m, pt.tau_i_ps_per_m, pt.theta_rad))
    out.add_csv(
        "gvm_curve.csv",
        ["lambda_p_nm", "lambda_s0_nm", "lambda_i0_nm", "tau_s_ps_per_m",
         "tau_i_ps_per_m", "theta_rad"],
        rows,
    )
    roots = agvm_roots(fiber, cfg.sweep["pump_range_nm"])
    out.add_csv("agvm_roots.csv", ["condition", "pump_nm"],
                [("tau_i_zero", roots.pump_for_tau_i_zero),
                 ("tau_s_zero", roots.pump_for_tau_s_zero)])
    return {}


def _cmd_jsa(cfg: RunConfig, out: _OutputSet, threads: int) -> dict:
    pump = _require_pump(cfg)
    named = _named_assemblies(cfg, pump)
    multi = len(named) > 1
    grids: dict[str, dict] = {}
    for name, assembly in named:
        jsa = build_jsa(assembly, pump, grid=_explicit_grid(cfg),
                        ns=cfg.grid["ns"], ni=cfg.grid["ni"], threads=threads,
                        **_grid_kwargs(cfg))
        grids[name] = _grid_record(jsa.grid)
        sfx = _suffix(name, multi)
        lam_s = jsa.grid.signal_wavelength_nm()[::-1]
        lam_i = jsa.grid.idler_wavelength_nm()[::-1]
        jsi = jsa.intensity()[::-1, ::-1]
        header = [""] + [_fmt(v) for v in lam_i]
        rows = [[_fmt(lam_s[i])] + [_fmt(v) for v in jsi[i]] for i in range(lam_s.size)]
        out.add_csv(f"jsi{sfx}.csv", header, rows)
        out.add_json(f"jsi_meta{sfx}.json", {
            "pump": _pump_record(pump),
            "assembly": _assembly_record(name, assembly),
            "grid": grids[name],
            "normalization": "raw",
        })
    return {"grid": grids[named[0][0]] if not multi else grids}


def _cmd_marginal(cfg: RunConfig, out: _OutputSet, threads: int) -> dict:
    pump = _require_pump(cfg)
    named = _named_assemblies(cfg, pump)
    multi = len(named) > 1
    grids: dict[str, dict] = {}
    for name, assembly in named:
        jsa = build_jsa(assembly, pump, grid=_explicit_grid(cfg),
                        ns=cfg.grid["ns"], ni=cfg.grid["ni"], threads=threads,
                        **_grid_kwargs(cfg))
        grids[name] = _grid_record(jsa.grid)
        sfx = _suffix(name, multi)
        out.add_csv(f"marginal_signal{sfx}.csv", ["x_nm", "intensity"],
                    _spectrum_rows(marginal(jsa, "signal")))
        out.add_csv(f"marginal_idler{sfx}.csv", ["x_nm", "intensity"],
                    _spectrum_rows(marginal(jsa, "idler")))
    return {"grid": grids[named[0][0]] if not multi else grids}


def _filter_centers(cfg: RunConfig, assembly: AssemblySpec) -> list[float]:
    filt = cfg.filt
    if filt["centers_nm"] is not None:
        return filt["centers_nm"]
    if filt["scan_range_nm"] is not None:
        lo, hi = filt["scan_range_nm"]
    else:
        # Scan across the union of the segments' phase-matched neighbourhoods.
        ls0 = [seg.point.lambda_s0_nm for seg in assembly.segments]
        lo, hi = min(ls0) - 12.0, max(ls0) + 12.0
    return list(np.linspace(lo, hi, filt["n_centers"]))


def _cmd_filter_scan(cfg: RunConfig, out: _OutputSet, threads: int) -> dict:
    pump = _require_pump(cfg)
    if cfg.filt is None:
        raise ConfigError("missing required field filter")
    named = _named_assemblies(cfg, pump)
    multi = len(named) > 1
    for name, assembly in named:
        centers = _filter_centers(cfg, assembly)
        center_nm = cfg.filt["center_nm"] or float(np.mean(centers))
        scan = filter_scan(assembly, FilterSpec(center_nm, cfg.filt["fwhm_nm"]),
                           centers, pump=pump)
        out.add_csv(f"filter_scan{_suffix(name, multi)}.csv", ["x_nm", "intensity"],
                    list(zip(scan.axis, scan.values)))
    return {}


def _cmd_g2(cfg: RunConfig, out: _OutputSet, threads: int) -> dict:
    pump = _require_pump(cfg)
    named = _named_assemblies(cfg, pump)
    if len(named) != 1:
        raise ConfigError("g2 works on a single assembly; use g2-table for sets")
    name, assembly = named[0]
    jsa = build_jsa(assembly, pump, grid=_explicit_grid(cfg),
                    ns=cfg.grid["ns"], ni=cfg.grid["ni"], threads=threads,
                    **_grid_kwargs(cfg))
    schmidt = schmidt_decompose(jsa)
    out.add_csv(
        "g2.csv",
        ["configuration", "total_length_m", "pump_fwhm_nm", "g2", "schmidt_number",
         "purity"],
        [(name, assembly.total_length_m, pump.fwhm_nm, g2_quadrature(jsa),
          schmidt.schmidt_number, schmidt.purity)],
    )
    return {"grid": _grid_record(jsa.grid)}


def _cmd_g2_table(cfg: RunConfig, out: _OutputSet, threads: int) -> dict:
    pump = _require_pump(cfg)
    if cfg.assemblies is None:
        raise ConfigError("missing required field assemblies")
    fwhms = cfg.pump_fwhms_nm or [pump.fwhm_nm]
    pumps = [PumpSpec(pump.center_wavelength_nm, fw, pump.gamma_per_w_km,
                      pump.peak_power_w) for fw in fwhms]
    configurations = _named_assemblies(cfg, pumps[0])
    rows = g2_table(configurations, pumps, grid=_explicit_grid(cfg),
                    ns=cfg.grid["ns"], ni=cfg.grid["ni"], threads=threads,
                    **_grid_kwargs(cfg))
    out.add_csv(
        "g2_table.csv",
        ["configuration", "total_length_m", "pump_fwhm_nm", "g2", "schmidt_number",
         "purity"],
        [(r.configuration, r.total_length_m, r.pump_fwhm_nm, r.g2,
          r.schmidt_number, r.purity) for r in rows],
    )
    return {}


def _cmd_plan(cfg: RunConfig, out: _OutputSet, threads: int) -> dict:
    pump = _require_pump(cfg)
    if cfg.planner is None:
        raise ConfigError("missing required field planner")
    if not cfg.segment_order:
        raise ConfigError("plan needs a segments list as the candidate pool")
    candidates = []
    for label in cfg.segment_order:
        entry = cfg.segments[label]
        point = _point_for(entry, pump, cfg.model)
        if entry.core_radius_nm is not None:
            fiber = entry.fiber()
        else:
            # Linearized planning uses only label and length; stand-in geometry.
            fiber = FiberSegment(label, 948.0, 0.296, entry.length_m)
        candidates.append((fiber, point))
    pool = SegmentPool(
        candidates=tuple(candidates),
        target_total_length_m=cfg.planner["target_total_length_m"],
        tolerance_m=cfg.planner["tolerance_m"],
        max_segments=cfg.planner["max_segments"],
    )
    plan = plan_exhaustive(pool, pump, max_plans=cfg.planner["max_plans"],
                           ns=cfg.grid["ns"], ni=cfg.grid["ni"], **_grid_kwargs(cfg))
    out.add_csv("plan_spectrum.csv", ["x_nm", "intensity"],
                _spectrum_rows(plan.predicted_spectrum))
    lengths = " ".join(_fmt(candidates[i][0].length_m) for i in plan.order)
    out.add_text("plan.txt", "\n".join([
        f"order: {' '.join(plan.labels)}",
        f"indices: {' '.join(str(i) for i in plan.order)}",
        f"lengths_m: {lengths}",
        f"total_length_m: {_fmt(plan.total_length_m)}",
        f"predicted_g2: {_fmt(plan.predicted_g2)}",
        "spectrum_csv: plan_spectrum.csv",
    ]) + "\n")
    return {}


_HANDLERS = {
    "dispersion": _cmd_dispersion,
    "fit": _cmd_fit,
    "phasematch": _cmd_phasematch,
    "gvm-curve": _cmd_gvm_curve,
    "jsa": _cmd_jsa,
    "marginal": _cmd_marginal,
    "filter-scan": _cmd_filter_scan,
    "g2": _cmd_g2,
    "g2-table": _cmd_g2_table,
    "plan": _cmd_plan,
}


def run(subcommand: str, config_path, out_dir=None, threads: int = 1,
        seed: int | None = None) -> int:
    """Execute one subcommand; returns the process exit status."""
    stage = "config"
    try:
        cfg = load_config(config_path)
        stage = subcommand
        out = _OutputSet(Path(out_dir) if out_dir else Path(cfg.output_dir))
        extra = _HANDLERS[subcommand](cfg, out, threads)
        # threads and seed are execution details, not results; keeping them out
        # of the manifest keeps reruns byte-identical across thread counts.
        manifest = {
            "subcommand": subcommand,
            "config_sha256": cfg.raw_sha256,
            "versions": {
                "sfwm": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": ".".join(str(v) for v in sys.version_info[:3]),
            },
            "grid": extra.get("grid"),
        }
        out.write_all(manifest)
        return 0
    except Exception as exc:  # noqa: BLE001 - single reporting point
        record = {"stage": stage, "message": f"{type(exc).__name__}: {exc}"}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sfwm",
        description="Photon-pair spectra from pulse-pumped four-wave mixing "
                    "in segmented photonic crystal fibers",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON run config")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for grid evaluation; results do not depend on it")
    parser.add_argument("--seed", type=int, default=None,
                        help="recorded in the manifest; reserved for noise studies")
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    return run(args.subcommand, args.config, args.out, args.threads, args.seed)


if __name__ == "__main__":
    sys.exit(main())
