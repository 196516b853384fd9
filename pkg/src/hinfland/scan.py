"""Grid scan of first-order controllers for a scalar-state plant.

For each grid point ``(A_K, B_K, D_K)`` with fixed ``C_K`` the scan records
stability, the H-infinity cost, a bounded-real certificate at
``gamma / (1 - eps)`` and ``ln sigma_min(P12)``, the quantity whose low
values trace the degenerate set in the ``(A_K, B_K C_K)`` plane.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .certificate import EIG_FLOOR, certify_floor
from .errors import DimensionError, HinflandError
from .lti import Controller, assemble_closed_loop, is_stable
from .norm import hinf_norm

__all__ = [
    "CSV_HEADER",
    "ScanConfig",
    "ScanRecord",
    "LineFit",
    "scan_point",
    "run_scan",
    "fit_degenerate_line",
    "emit_csv",
    "read_csv",
    "emit_svg_heatmap",
    "slices",
]

CSV_HEADER = ("a_k", "b_k", "d_k", "stabilizing", "gamma", "ln_abs_p12",
              "lambda_min_p", "cert_method", "lmi_max_eig")


@dataclass(frozen=True)
class ScanConfig:
    """Grid over ``A_K x B_K x D_K`` with ``C_K`` held fixed.

    Defaults are the desk-scale 41 x 41 x 13 grid over
    ``[-2, 2] x [-4, 4] x [-1.5, 1.5]``.
    """

    a_range: tuple = (-2.0, 2.0)
    b_range: tuple = (-4.0, 4.0)
    d_range: tuple = (-1.5, 1.5)
    counts: tuple = (41, 41, 13)
    ck: float = 1.0
    eps: float = 1e-9
    eig_floor: float = EIG_FLOOR
    workers: int = 1

    def __post_init__(self):
        for name in ("a_range", "b_range", "d_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must be a nonempty interval, got {(lo, hi)}")
        if len(self.counts) != 3 or min(self.counts) < 2:
            raise ValueError("counts must be three integers >= 2")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @classmethod
    def full_scale(cls, **kw):
        return cls(counts=(101, 101, 61), **kw)

    def axes(self):
        return tuple(np.linspace(lo, hi, n) for (lo, hi), n in
                     zip((self.a_range, self.b_range, self.d_range), self.counts))

    def points(self):
        """Grid points in row-major order, ``D_K`` fastest."""
        a, b, d = self.axes()
        for ak in a:
            for bk in b:
                for dk in d:
                    yield float(ak), float(bk), float(dk)

    def __len__(self):
        return int(np.prod(self.counts))


@dataclass(frozen=True)
class ScanRecord:
    a_k: float
    b_k: float
    d_k: float
    stabilizing: bool
    gamma: float | None = None
    ln_abs_p12: float | None = None
    lambda_min_p: float | None = None
    cert_method: str = "none"
    lmi_max_eig: float | None = None
    error: str | None = None

    def as_dict(self):
        return asdict(self)


def _controller(ak, bk, dk, ck):
    return Controller.from_blocks([[dk]], [[ck]], [[bk]], [[ak]])


def scan_point(plant, ak, bk, dk, ck=1.0, eps=1e-9, eig_floor=EIG_FLOOR):
    """One grid point; failures are recorded, never raised."""
    k = _controller(ak, bk, dk, ck)
    cl = assemble_closed_loop(plant, k)
    if not is_stable(cl.Acl):
        return ScanRecord(ak, bk, dk, False)
    try:
        gamma = hinf_norm(cl, eps).gamma
        ok, cert = certify_floor(cl, None, gamma / (1.0 - eps), eig_floor)
    except (HinflandError, np.linalg.LinAlgError) as exc:
        return ScanRecord(ak, bk, dk, True, error=f"{type(exc).__name__}: {exc}")
    if cert is None:
        return ScanRecord(ak, bk, dk, True, gamma, error="no certificate")
    s = cert.p12_sigma_min
    return ScanRecord(
        ak, bk, dk, True, gamma,
        ln_abs_p12=math.log(s) if s > 0 else -math.inf,
        lambda_min_p=cert.lambda_min_P,
        cert_method=cert.method,
        lmi_max_eig=cert.lmi_max_eig,
        error=None if ok else "certificate below eigenvalue floor",
    )


def _chunk(args):
    plant, pts, ck, eps, floor = args
    return [scan_point(plant, a, b, d, ck, eps, floor) for a, b, d in pts]


def run_scan(plant, config: ScanConfig | None = None, chunk=64):
    """All grid records in row-major order (``D_K`` fastest).

    With ``config.workers > 1`` chunks run in a process pool; results are
    reassembled in grid order, so the output does not depend on the worker
    count.
    """
    config = config or ScanConfig()
    if (plant.nx, plant.nu, plant.ny) != (1, 1, 1):
        raise DimensionError("the scan needs a plant with nx = nu = ny = 1", block="A")
    pts = list(config.points())
    jobs = [(plant, pts[i:i + chunk], config.ck, config.eps, config.eig_floor)
            for i in range(0, len(pts), chunk)]
    if config.workers == 1:
        for job in jobs:
            yield from _chunk(job)
        return
    with ProcessPoolExecutor(config.workers) as ex:
        for recs in ex.map(_chunk, jobs):
            yield from recs


def slices(records):
    """Group records by ``d_k`` (insertion order of first appearance)."""
    out = {}
    for r in records:
        out.setdefault(r.d_k, []).append(r)
    return out


class LineFit(NamedTuple):
    theta: float  # normal angle: cos(theta) a + sin(theta) b c = 0
    max_perp_dist: float
    n_low: int
    status: str = "ok"  # or "insufficient data"


def fit_degenerate_line(records, low_quantile=0.02, ck=1.0):
    """Through-origin line fitted to the lowest ``ln|P12|`` values of a slice.

    Records with finite ``ln_abs_p12`` at or below the slice's
    ``low_quantile`` are fitted by total least squares in the
    ``(A_K, B_K C_K)`` plane. ``theta`` is the angle of the line's unit
    normal, folded into ``(-pi/2, pi/2]``.
    """
    if not 0 < low_quantile < 0.5:
        raise ValueError("low_quantile must lie in (0, 0.5)")
    pts, vals = [], []
    for r in records:
        if r.ln_abs_p12 is not None and np.isfinite(r.ln_abs_p12):
            pts.append((r.a_k, r.b_k * ck))
            vals.append(r.ln_abs_p12)
        elif r.ln_abs_p12 == -math.inf:
            pts.append((r.a_k, r.b_k * ck))
            vals.append(-math.inf)
    if not vals:
        return LineFit(math.nan, math.nan, 0, "insufficient data")
    vals = np.asarray(vals)
    pts = np.asarray(pts)
    finite = vals[np.isfinite(vals)]
    thr = np.quantile(finite, low_quantile) if finite.size else -math.inf
    low = pts[vals <= thr]
    n = len(low)
    if n < 3:
        return LineFit(math.nan, math.nan, n, "insufficient data")
    w, U = np.linalg.eigh(low.T @ low)
    normal = U[:, 0]
    theta = math.atan2(normal[1], normal[0])
    if theta <= -math.pi / 2:
        theta += math.pi
    elif theta > math.pi / 2:
        theta -= math.pi
    dist = float(np.max(np.abs(low @ normal)))
    return LineFit(theta, dist, n)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    return format(float(v), ".12g")


def emit_csv(records, path):
    """Write records with the fixed header, 12 significant digits, LF endings.

    ``path`` may also be an open text stream.
    """
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    for r in records:
        buf.write(",".join(_fmt(getattr(r, c)) for c in CSV_HEADER) + "\n")
    if hasattr(path, "write"):
        path.write(buf.getvalue())
        return
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_csv(path):
    """Inverse of :func:`emit_csv`."""

    def num(s):
        return None if s == "" else float(s)

    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header")
    out = []
    for row in rows[1:]:
        d = dict(zip(CSV_HEADER, row))
        out.append(ScanRecord(
            float(d["a_k"]), float(d["b_k"]), float(d["d_k"]), d["stabilizing"] == "true",
            num(d["gamma"]), num(d["ln_abs_p12"]), num(d["lambda_min_p"]),
            d["cert_method"] or "none", num(d["lmi_max_eig"]),
        ))
    return out


# viridis anchors; luminance increases monotonically along the map
_CMAP = np.array([
    (68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37),
], dtype=float)


def _color(x):
    x = min(max(x, 0.0), 1.0) * (len(_CMAP) - 1)
    i = min(int(x), len(_CMAP) - 2)
    c = _CMAP[i] + (x - i) * (_CMAP[i + 1] - _CMAP[i])
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in c)


def emit_svg_heatmap(records, field, path, cell=6, title=None):
    """Heatmap of one ``D_K`` slice: ``A_K`` on x, ``B_K`` on y.

    Each grid point becomes one ``<rect class="cell">``. Finite values are
    mapped linearly over their range onto a viridis-like colormap (dark
    blue is low); missing or non-finite values are drawn grey.
    """
    if field not in CSV_HEADER or field in ("stabilizing", "cert_method"):
        raise ValueError(f"cannot plot field {field!r}")
    recs = list(records)
    a_vals = sorted({r.a_k for r in recs})
    b_vals = sorted({r.b_k for r in recs})
    vals = [getattr(r, field) for r in recs]
    fin = [v for v in vals if v is not None and np.isfinite(v)]
    lo, hi = (min(fin), max(fin)) if fin else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    ia = {a: i for i, a in enumerate(a_vals)}
    ib = {b: i for i, b in enumerate(b_vals)}
    mx, my = 60, 30
    w, h = len(a_vals) * cell, len(b_vals) * cell
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w + mx + 20}" height="{h + my + 50}">',
        f'<text x="{mx + w / 2}" y="{my - 10}" text-anchor="middle" font-size="12">'
        f'{title or field}</text>',
    ]
    for r, v in zip(recs, vals):
        x = mx + ia[r.a_k] * cell
        y = my + (len(b_vals) - 1 - ib[r.b_k]) * cell  # B_K increases upward
        fill = _color((v - lo) / span) if v is not None and np.isfinite(v) else "#bdbdbd"
        out.append(f'<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}"/>')
    out += [
        f'<text x="{mx + w / 2}" y="{my + h + 30}" text-anchor="middle" font-size="12">A_K</text>',
        f'<text x="15" y="{my + h / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {my + h / 2})">B_K</text>',
        f'<text x="{mx}" y="{my + h + 15}" font-size="10">{a_vals[0]:g}</text>' if a_vals else "",
        f'<text x="{mx + w}" y="{my + h + 15}" font-size="10" text-anchor="end">{a_vals[-1]:g}</text>'
        if a_vals else "",
        f'<!-- colormap range [{lo:.12g}, {hi:.12g}] -->',
        "</svg>",
    ]
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write("\n".join(s for s in out if s) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
