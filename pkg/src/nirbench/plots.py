"""Static SVG figures written as plain text (no plotting library)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

W, H = 480, 400
MARGIN = 56
PALETTE = ("#1b6ca8", "#d1495b", "#edae49", "#00798c", "#66a182", "#8d5a97")
RADAR_AXES = ("rmse", "mard", "clarke_a", "within_15", "loa_width", "parameters")


def _f(v: float) -> str:
    return f"{v:.2f}"


class _Plot:
    def __init__(self, xlim, ylim, title: str, xlabel: str, ylabel: str):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
            f'<rect width="{W}" height="{H}" fill="white"/>',
            f'<text x="{W / 2}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">'
            f'{escape(title)}</text>',
            f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">'
            f'{escape(xlabel)}</text>',
            f'<text x="14" y="{H / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" '
            f'transform="rotate(-90 14 {H / 2})">{escape(ylabel)}</text>',
            f'<rect x="{MARGIN}" y="{MARGIN / 2}" width="{W - 1.5 * MARGIN}" height="{H - 1.5 * MARGIN}" '
            f'fill="none" stroke="black"/>',
        ]
        for k in range(5):
            xv = self.x0 + k * (self.x1 - self.x0) / 4
            yv = self.y0 + k * (self.y1 - self.y0) / 4
            self.parts.append(f'<text x="{_f(self.px(xv))}" y="{H - MARGIN + 16}" text-anchor="middle" '
                              f'font-family="sans-serif" font-size="10">{xv:.4g}</text>')
            self.parts.append(f'<text x="{MARGIN - 4}" y="{_f(self.py(yv) + 3)}" text-anchor="end" '
                              f'font-family="sans-serif" font-size="10">{yv:.4g}</text>')

    def px(self, x: float) -> float:
        return MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 1.5 * MARGIN)

    def py(self, y: float) -> float:
        return H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 1.5 * MARGIN)

    def line(self, xs, ys, color="black", width=1.0, dash=None):
        pts = " ".join(f"{_f(self.px(x))},{_f(self.py(y))}" for x, y in zip(xs, ys))
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"{d}/>')

    def points(self, xs, ys, color=PALETTE[0], r=2.5):
        for x, y in zip(xs, ys):
            self.parts.append(f'<circle cx="{_f(self.px(x))}" cy="{_f(self.py(y))}" r="{r}" fill="{color}" '
                              f'fill-opacity="0.7"/>')

    def label(self, x, y, text, size=11, color="black"):
        self.parts.append(f'<text x="{_f(self.px(x))}" y="{_f(self.py(y))}" font-family="sans-serif" '
                          f'font-size="{size}" fill="{color}">{escape(text)}</text>')

    def svg(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def clarke_svg(ref, pred, title="Clarke error grid") -> str:
    p = _Plot((0, 400), (0, 400), title, "reference glucose (mg/dL)", "predicted glucose (mg/dL)")
    g = p.line
    g([0, 400], [0, 400], "#999999", dash="3,3")
    g([0, 58.33, 400], [70, 70, 400 * 1.2], "black")  # upper A/B
    g([70, 70, 400], [0, 56, 320], "black")  # lower A/B
    g([70, 70], [84, 400]); g([0, 70], [180, 180])  # upper D / E
    g([70, 290], [180, 400])  # upper C
    g([130, 180, 180, 400], [0, 70, 70, 70])  # lower C and E
    g([240, 240, 400], [70, 180, 180])  # lower D
    for z, (x, y) in {"A": (30, 15), "B": (330, 210), "C": (150, 360), "D": (20, 120), "E": (300, 20)}.items():
        p.label(x, y, z, 14)
    r = np.clip(np.asarray(ref, dtype=float), 0, 400)
    q = np.clip(np.asarray(pred, dtype=float), 0, 400)
    p.points(r, q)
    return p.svg()


def bland_altman_svg(pred, ref, title="Bland-Altman") -> str:
    pred = np.asarray(pred, dtype=float)
    ref = np.asarray(ref, dtype=float)
    mean = (pred + ref) / 2
    d = pred - ref
    bias = float(d.mean())
    sd = float(d.std(ddof=1)) if d.size > 1 else 0.0
    lo, hi = bias - 1.96 * sd, bias + 1.96 * sd
    span = max(abs(lo), abs(hi), float(np.abs(d).max()), 1.0) * 1.2
    xlim = (float(mean.min()) - 5, float(mean.max()) + 5)
    p = _Plot(xlim, (-span, span), title, "mean of prediction and reference (mg/dL)", "difference (mg/dL)")
    p.points(mean, d)
    p.line(xlim, [bias, bias], PALETTE[1])
    for v in (lo, hi):
        p.line(xlim, [v, v], PALETTE[1], dash="4,3")
    p.label(xlim[0] + 2, hi, f"+1.96 SD {hi:.1f}", 10)
    p.label(xlim[0] + 2, lo, f"-1.96 SD {lo:.1f}", 10)
    return p.svg()


def linearity_svg(pred, ref, title="Linearity") -> str:
    pred = np.asarray(pred, dtype=float)
    ref = np.asarray(ref, dtype=float)
    lo = float(min(pred.min(), ref.min())) - 5
    hi = float(max(pred.max(), ref.max())) + 5
    p = _Plot((lo, hi), (lo, hi), title, "reference glucose (mg/dL)", "predicted glucose (mg/dL)")
    p.line([lo, hi], [lo, hi], "#999999", dash="3,3")
    p.points(ref, pred)
    rc = ref - ref.mean()
    sxx = float(rc @ rc)
    if sxx > 0:
        slope = float(rc @ (pred - pred.mean())) / sxx
        icpt = float(pred.mean() - slope * ref.mean())
        p.line([lo, hi], [icpt + slope * lo, icpt + slope * hi], PALETTE[1])
    return p.svg()


def loss_svg(histories: dict, title="Validation loss") -> str:
    """histories: model -> sequence of (epoch, val_loss)."""
    series = {k: np.asarray(v, dtype=float) for k, v in histories.items() if len(v)}
    if not series:
        return _Plot((0, 1), (0, 1), title, "epoch", "log10 MSE").svg()
    ep_max = max(float(s[:, 0].max()) for s in series.values())
    logs = {k: np.log10(np.maximum(s[:, 1], 1e-12)) for k, s in series.items()}
    ymin = min(float(v.min()) for v in logs.values())
    ymax = max(float(v.max()) for v in logs.values())
    p = _Plot((0, max(ep_max, 1.0)), (ymin - 0.1, ymax + 0.1), title, "epoch", "log10 validation MSE")
    for k, (name, s) in enumerate(series.items()):
        col = PALETTE[k % len(PALETTE)]
        p.line(s[:, 0], logs[name], col, 1.2)
        p.label(ep_max * 0.55, ymax - 0.08 * (k + 1) * (ymax - ymin + 0.2), name, 10, col)
    return p.svg()


def radar_scores(rows: list[dict]) -> dict[str, list[float]]:
    """Min-max normalise each criterion to [0, 1] with 1 = best."""
    out = {r["model"]: [] for r in rows}
    for axis in RADAR_AXES:
        vals = np.array([float(r[axis]) for r in rows])
        if axis == "parameters":
            vals = np.log10(np.maximum(vals, 1.0))
        higher_better = axis in ("clarke_a", "within_15")
        span = vals.max() - vals.min()
        norm = np.ones_like(vals) if span == 0 else (vals - vals.min()) / span
        if not higher_better:
            norm = 1.0 - norm if span else norm
        for r, v in zip(rows, norm):
            out[r["model"]].append(float(v))
    return out


def radar_svg(rows: list[dict], title="Multi-criteria comparison") -> str:
    cx, cy, rad = W / 2, H / 2 + 10, 140
    n = len(RADAR_AXES)
    ang = [math.pi / 2 - 2 * math.pi * k / n for k in range(n)]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<text x="{W / 2}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">'
             f'{escape(title)}</text>']
    for ring in (0.25, 0.5, 0.75, 1.0):
        pts = " ".join(f"{_f(cx + ring * rad * math.cos(a))},{_f(cy - ring * rad * math.sin(a))}" for a in ang)
        parts.append(f'<polygon points="{pts}" fill="none" stroke="#cccccc"/>')
    for a, name in zip(ang, RADAR_AXES):
        x, y = cx + rad * math.cos(a), cy - rad * math.sin(a)
        parts.append(f'<line class="axis" x1="{cx}" y1="{_f(cy)}" x2="{_f(x)}" y2="{_f(y)}" stroke="#888888"/>')
        parts.append(f'<text x="{_f(cx + 1.12 * rad * math.cos(a))}" y="{_f(cy - 1.12 * rad * math.sin(a))}" '
                     f'text-anchor="middle" font-family="sans-serif" font-size="10">{escape(name)}</text>')
    for k, (model, vals) in enumerate(radar_scores(rows).items()):
        col = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_f(cx + (0.05 + 0.95 * v) * rad * math.cos(a))},"
                       f"{_f(cy - (0.05 + 0.95 * v) * rad * math.sin(a))}" for v, a in zip(vals, ang))
        parts.append(f'<polygon points="{pts}" fill="{col}" fill-opacity="0.12" stroke="{col}"/>')
        parts.append(f'<text x="10" y="{40 + 14 * k}" font-family="sans-serif" font-size="10" fill="{col}">'
                     f'{escape(model)}</text>')
    return "\n".join(parts + ["</svg>"]) + "\n"
