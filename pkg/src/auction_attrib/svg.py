"""Self-contained SVG of revenue and welfare curves against the called fraction."""

from __future__ import annotations

from xml.sax.saxutils import escape

PALETTE = ["#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"]
PANEL_W, PANEL_H, PAD = 360, 260, 45


def _panel(results, attr, x0, title):
    ys = [getattr(p, attr) for r in results for p in r.points] or [0.0]
    lo, hi = min(0.0, min(ys)), max(ys)
    hi = hi if hi > lo else lo + 1.0

    def sx(v):
        return x0 + PAD + v * (PANEL_W - 2 * PAD)

    def sy(v):
        return PANEL_H - PAD - (v - lo) / (hi - lo) * (PANEL_H - 2 * PAD)

    parts = [
        f'<text x="{x0 + PANEL_W / 2}" y="20" text-anchor="middle">{escape(title)}</text>',
        f'<line x1="{sx(0)}" y1="{sy(lo)}" x2="{sx(1)}" y2="{sy(lo)}" stroke="black"/>',
        f'<line x1="{sx(0)}" y1="{sy(lo)}" x2="{sx(0)}" y2="{sy(hi)}" stroke="black"/>',
        f'<text x="{sx(0.5)}" y="{PANEL_H - 10}" text-anchor="middle">fraction called</text>',
        f'<text x="{sx(0) - 4}" y="{sy(hi) + 4}" text-anchor="end">{hi:.3g}</text>',
        f'<text x="{sx(0) - 4}" y="{sy(lo) + 4}" text-anchor="end">{lo:.3g}</text>',
    ]
    for k, res in enumerate(results):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{sx(p.pct_called):.2f},{sy(getattr(p, attr)):.2f}" for p in res.points)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
    return parts


def render_curves(results) -> str:
    width = 2 * PANEL_W + 120
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{PANEL_H}" fill="white"/>',
    ]
    parts += _panel(results, "revenue", 0, "revenue")
    parts += _panel(results, "welfare", PANEL_W, "welfare")
    for k, res in enumerate(results):
        color = PALETTE[k % len(PALETTE)]
        y = 40 + 16 * k
        parts.append(f'<rect x="{2 * PANEL_W + 10}" y="{y - 9}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{2 * PANEL_W + 26}" y="{y}">{escape(res.mechanism)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
