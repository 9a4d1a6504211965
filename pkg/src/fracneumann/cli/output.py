"""CSV tables, SVG polylines and the run manifest."""
from __future__ import annotations

import hashlib
import json
import os
import platform

import numpy as np


def format_number(v):
    v = float(v)
    if np.isnan(v):
        return "nan"
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return "%.17g" % v


def write_csv(path, header, columns):
    cols = [np.atleast_1d(np.asarray(c)) for c in columns]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("CSV columns must have equal length")
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join(format_number(c[i]) if np.issubdtype(c.dtype, np.number)
                              else str(c[i]) for c in cols))
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array(rows, dtype=float) if rows else np.zeros((0, len(header)))
    return header, data


_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def write_svg(path, series, title="", xlabel="", ylabel="", logy=False,
              width=640, height=400):
    """Line plot of ``series``: a list of (x, y, label) tuples."""
    ml, mr, mt, mb = 70, 20, 40, 50
    pts = []
    for x, y, _ in series:
        x, y = np.asarray(x, float), np.asarray(y, float)
        if logy:
            ok = y > 0
            x, y = x[ok], np.log10(y[ok])
        ok = np.isfinite(x) & np.isfinite(y)
        pts.append((x[ok], y[ok]))
    allx = np.concatenate([p[0] for p in pts]) if pts else np.zeros(1)
    ally = np.concatenate([p[1] for p in pts]) if pts else np.zeros(1)
    if allx.size == 0:
        allx = ally = np.zeros(1)
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pw, ph = width - ml - mr, height - mt - mb
    sx = lambda v: ml + (v - x0) / (x1 - x0) * pw
    sy = lambda v: mt + (1 - (v - y0) / (y1 - y0)) * ph
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
           f'<text x="{width / 2}" y="24" text-anchor="middle" font-size="15">{_esc(title)}</text>',
           f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="13">{_esc(xlabel)}</text>',
           f'<text x="16" y="{height / 2}" text-anchor="middle" font-size="13" '
           f'transform="rotate(-90 16 {height / 2})">{_esc(ylabel + (" (log10)" if logy else ""))}</text>']
    for v, anchor in ((x0, "start"), (x1, "end")):
        out.append(f'<text x="{sx(v):.2f}" y="{mt + ph + 16}" text-anchor="{anchor}" '
                   f'font-size="11">{v:.4g}</text>')
    for v in (y0, y1):
        out.append(f'<text x="{ml - 6}" y="{sy(v) + 4:.2f}" text-anchor="end" '
                   f'font-size="11">{v:.4g}</text>')
    for k, ((x, y), (_, _, label)) in enumerate(zip(pts, series)):
        color = _COLORS[k % len(_COLORS)]
        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        out.append(f'<text x="{ml + 8}" y="{mt + 16 + 14 * k}" font-size="12" '
                   f'fill="{color}">{_esc(label)}</text>')
    out.append("</svg>")
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
    return path


def _esc(text):
    return (str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def versions():
    import scipy
    import pydantic
    from .. import __version__
    return {"fracneumann": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "pydantic": pydantic.VERSION}


def write_manifest(out_dir, config_json, seed, files, timings, extra=None):
    entries = []
    for f in files:
        entries.append({"path": os.path.basename(f), "sha256": sha256_file(f),
                        "bytes": os.path.getsize(f)})
    manifest = {"config": json.loads(config_json), "versions": versions(), "seed": seed,
                "outputs": entries, "timings": timings}
    if extra:
        manifest["results"] = extra
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON serializable: {type(v).__name__}")
