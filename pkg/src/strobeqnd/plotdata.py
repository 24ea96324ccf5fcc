"""Convert experiment CSVs into gnuplot-style column files plus a JSON sidecar.

No plotting library is involved: each ``.dat`` file holds whitespace
separated columns under a ``#`` header, and ``<stem>.plot.json`` describes
axes, labels and line styles for whatever tool renders them.
"""

from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path

from .io import format_value, read_csv

SCHEMAS = {
    "psd": ["freq_hz", "psd_rad2_per_hz"],
    "timeseries": ["t_s", "phi_rad"],
    "trajectory": ["t_s", "F_x", "F_y", "F_z"],
    "sweep_strobe": ["f_s_hz", "P0", "area_rad2", "raw_area_rad2", "psn_rad2_per_hz", "ratio_to_unpolarized"],
    "sweep_duty": ["duty", "P0", "area_rad2", "raw_area_rad2", "psn_rad2_per_hz", "ratio_to_unpolarized"],
    "sweep_polarization": ["P0", "area_rad2", "raw_area_rad2", "psn_rad2_per_hz", "ratio_to_unpolarized",
                           "model_ratio"],
    "sweep_od": ["od", "r_se_over_r_sd", "scheme", "eps1", "eps2", "t_m_s", "var_rel_sql"],
}


class SchemaError(ValueError):
    pass


def detect_kind(header):
    for kind, cols in SCHEMAS.items():
        if header == cols:
            return kind
    expected = "; ".join(f"{k}: {', '.join(c)}" for k, c in SCHEMAS.items())
    raise SchemaError(f"unrecognized columns {header}; expected one of {expected}")


def _write_dat(path: Path, columns, rows):
    with path.open("w", newline="") as fh:
        fh.write("# " + " ".join(columns) + "\n")
        for row in rows:
            fh.write(" ".join(format_value(v) for v in row) + "\n")
    return path


def _entry(path, columns, xlabel, ylabel, title, style="solid", **extra):
    return dict(file=path.name, columns=columns, xlabel=xlabel, ylabel=ylabel, title=title,
                style=style, **extra)


def emit_plotdata(csv_path, out_dir, kind=None):
    """Write plot files for ``csv_path`` into ``out_dir``; returns the written paths."""
    csv_path = Path(csv_path)
    header, rows = read_csv(csv_path)
    if header is None or not rows:
        raise SchemaError(f"{csv_path} has no data rows")
    if kind is None:
        kind = detect_kind(header)
    elif kind not in SCHEMAS:
        raise SchemaError(f"unknown kind {kind!r}; expected one of {', '.join(SCHEMAS)}")
    elif header != SCHEMAS[kind]:
        raise SchemaError(f"{csv_path}: expected columns {', '.join(SCHEMAS[kind])}, got {', '.join(header)}")
    col = {name: i for i, name in enumerate(header)}

    def num(r, name):
        return float(r[col[name]])

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = csv_path.stem
    entries = []
    if kind == "psd":
        p = _write_dat(out / f"{stem}.dat", ["freq_hz", "psd_rad2_per_hz"],
                       [(num(r, "freq_hz"), num(r, "psd_rad2_per_hz")) for r in rows])
        entries.append(_entry(p, [1, 2], "frequency (Hz)", "PSD (rad^2/Hz)", "polarimeter noise spectrum",
                              logscale="y"))
    elif kind == "timeseries":
        p = _write_dat(out / f"{stem}.dat", ["t_s", "phi_rad"], [(num(r, "t_s"), num(r, "phi_rad")) for r in rows])
        entries.append(_entry(p, [1, 2], "time (s)", "rotation (rad)", "polarimeter output"))
    elif kind == "trajectory":
        p = _write_dat(out / f"{stem}.dat", ["t_s", "F_x", "F_y", "F_z"],
                       [[num(r, c) for c in ("t_s", "F_x", "F_y", "F_z")] for r in rows])
        entries.append(_entry(p, [1, 2], "time (s)", "collective spin", "transverse spin F_x"))
    elif kind in ("sweep_strobe", "sweep_duty"):
        x = "f_s_hz" if kind == "sweep_strobe" else "duty"
        xlabel = "strobe frequency (Hz)" if kind == "sweep_strobe" else "duty cycle"
        groups = defaultdict(list)
        for r in rows:
            groups[num(r, "P0")].append(r)
        for P, grp in sorted(groups.items()):
            p = _write_dat(out / f"{stem}_P0_{P:g}.dat", [x, "area_rad2"], [(num(r, x), num(r, "area_rad2")) for r in grp])
            entries.append(_entry(p, [1, 2], xlabel, "atomic noise area (rad^2)", f"P0 = {P:g}"))
            if P > 0:
                p = _write_dat(out / f"{stem}_ratio_P0_{P:g}.dat", [x, "ratio_to_unpolarized"],
                               [(num(r, x), num(r, "ratio_to_unpolarized")) for r in grp])
                entries.append(_entry(p, [1, 2], xlabel, "polarized / unpolarized noise", f"P0 = {P:g}"))
    elif kind == "sweep_polarization":
        p = _write_dat(out / f"{stem}.dat", ["P0", "ratio_to_unpolarized", "model_ratio"],
                       [(num(r, "P0"), num(r, "ratio_to_unpolarized"), num(r, "model_ratio")) for r in rows])
        entries.append(_entry(p, [1, 2], "polarization", "polarized / unpolarized noise", "simulated", style="points"))
        entries.append(_entry(p, [1, 3], "polarization", "polarized / unpolarized noise", "spin temperature"))
    elif kind == "sweep_od":
        groups = defaultdict(list)
        for r in rows:
            groups[(num(r, "r_se_over_r_sd"), r[col["scheme"]])].append(r)
        for (ratio, scheme), grp in sorted(groups.items()):
            p = _write_dat(out / f"{stem}_rse_{ratio:g}_{scheme}.dat", ["od", "var_rel_sql"],
                           sorted((num(r, "od"), num(r, "var_rel_sql")) for r in grp))
            entries.append(_entry(p, [1, 2], "optical density", "field variance / SQL",
                                  f"R_se/R_sd = {ratio:g}, {scheme.replace('_', ' ')}",
                                  style="solid" if scheme == "two_pulse" else "dashed", logscale="x"))
    sidecar = out / f"{stem}.plot.json"
    sidecar.write_text(json.dumps(dict(source=csv_path.name, kind=kind, plots=entries), indent=2) + "\n")
    files = sorted({out / e["file"] for e in entries})
    return files + [sidecar]
