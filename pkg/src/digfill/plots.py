"""Plan-view SVG plots written by hand (no plotting dependency).

Every plot is a deterministic function of its inputs: coordinates are
rounded to 0.01 px and elements are emitted in a fixed order.
"""

from __future__ import annotations

import logging
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .dbscan import NOISE

log = logging.getLogger(__name__)

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#bcbd22", "#17becf", "#7f7f7f")
NOISE_COLOUR = "#bbbbbb"


class Canvas:
    def __init__(self, points: np.ndarray, title: str, size: int = 640, pad: int = 40):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        lo = pts.min(axis=0) if len(pts) else np.zeros(2)
        hi = pts.max(axis=0) if len(pts) else np.ones(2)
        span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-9))
        self.lo, self.span = lo, span
        self.size, self.pad = size, pad
        self.scale = (size - 2 * pad) / span
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
            f'viewBox="0 0 {size} {size}">',
            f'<rect width="{size}" height="{size}" fill="white"/>',
            f'<text x="{pad}" y="{pad // 2}" font-family="sans-serif" '
            f'font-size="14">{escape(title)}</text>',
        ]

    def xy(self, x, y) -> tuple[str, str]:
        px = self.pad + (x - self.lo[0]) * self.scale
        # SVG y grows downwards; northing grows upwards
        py = self.size - self.pad - (y - self.lo[1]) * self.scale
        return f"{px:.2f}", f"{py:.2f}"

    def open_group(self, cls: str, **attrs) -> None:
        extra = "".join(f' data-{k}="{escape(str(v))}"' for k, v in attrs.items())
        self.parts.append(f'<g class="{cls}"{extra}>')

    def close_group(self) -> None:
        self.parts.append("</g>")

    def dots(self, pts, colour: str, r: float = 2.5, opacity: float = 1.0) -> None:
        for x, y in np.asarray(pts, dtype=float).reshape(-1, 2):
            cx, cy = self.xy(x, y)
            self.parts.append(f'<circle cx="{cx}" cy="{cy}" r="{r}" fill="{colour}" '
                              f'fill-opacity="{opacity}"/>')

    def cross(self, x, y, colour: str, r: float = 5.0) -> None:
        cx, cy = (float(v) for v in self.xy(x, y))
        self.parts.append(
            f'<path d="M{cx - r:.2f},{cy - r:.2f}L{cx + r:.2f},{cy + r:.2f}'
            f'M{cx - r:.2f},{cy + r:.2f}L{cx + r:.2f},{cy - r:.2f}" '
            f'stroke="{colour}" stroke-width="2"/>'
        )

    def ring(self, x, y, colour: str, r: float = 6.0) -> None:
        cx, cy = self.xy(x, y)
        self.parts.append(f'<circle cx="{cx}" cy="{cy}" r="{r}" fill="none" '
                          f'stroke="{colour}" stroke-width="2"/>')

    def segment(self, a, b, colour: str) -> None:
        x1, y1 = self.xy(*a)
        x2, y2 = self.xy(*b)
        self.parts.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" '
                          f'stroke="{colour}" stroke-width="1.5"/>')

    def legend(self, entries) -> None:
        y = self.size - self.pad // 2
        x = self.pad
        for label, colour in entries:
            self.parts.append(f'<circle cx="{x}" cy="{y - 4}" r="4" fill="{colour}"/>')
            self.parts.append(f'<text x="{x + 8}" y="{y}" font-family="sans-serif" '
                              f'font-size="11">{escape(label)}</text>')
            x += 110

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def colour(label: int) -> str:
    return NOISE_COLOUR if label == NOISE else PALETTE[label % len(PALETTE)]


def plot_telemetry(digs, dumps, excavator) -> str:
    """(a) raw telemetry by role."""
    digs, dumps, exc = (np.asarray(a, dtype=float).reshape(-1, 2) for a in (digs, dumps, excavator))
    c = Canvas(np.vstack([digs, dumps, exc]), "Telemetry by role (plan view)")
    for cls, pts, col in (("excavator", exc, "#2ca02c"), ("dump", dumps, "#ff7f0e"),
                          ("dig", digs, "#1f77b4")):
        c.open_group(cls)
        c.dots(pts, col, r=2.0)
        c.close_group()
    c.legend([("bucket dig", "#1f77b4"), ("bucket dump", "#ff7f0e"), ("excavator", "#2ca02c")])
    return c.render()


def plot_clusters(xy, labels) -> str:
    """(b) dig points coloured by cluster, noise in grey."""
    xy = np.asarray(xy, dtype=float)[:, :2]
    labels = np.asarray(labels)
    c = Canvas(xy, "DBSCAN clusters of dig positions")
    c.open_group("noise")
    c.dots(xy[labels == NOISE], NOISE_COLOUR)
    c.close_group()
    for k in sorted(set(labels.tolist()) - {NOISE}):
        c.open_group("cluster", label=k)
        c.dots(xy[labels == k], colour(k))
        c.close_group()
    return c.render()


def plot_moments(truth, predicted, train) -> str:
    """(c) true vs inferred cluster means with error segments."""
    pts = [(r.mean_x, r.mean_y) for r in (*truth, *predicted, *train)]
    pts += [(r.exc_x, r.exc_y) for r in (*predicted, *train)]
    c = Canvas(np.array(pts), "Ground-truth vs inferred cluster means")
    c.open_group("train")
    c.dots([(r.mean_x, r.mean_y) for r in train], "#7f7f7f", r=3.0)
    c.dots([(r.exc_x, r.exc_y) for r in train], "#2ca02c", r=2.0)
    c.close_group()
    t_by_id = {r.cluster_id: r for r in truth}
    c.open_group("test")
    for p in predicted:
        t = t_by_id.get(p.cluster_id)
        if t is not None:
            c.segment((t.mean_x, t.mean_y), (p.mean_x, p.mean_y), "#d62728")
            c.ring(t.mean_x, t.mean_y, "#1f77b4")
        c.cross(p.mean_x, p.mean_y, "#d62728")
        c.dots([(p.exc_x, p.exc_y)], "#2ca02c", r=3.0)
    c.close_group()
    c.legend([("train mean", "#7f7f7f"), ("true mean", "#1f77b4"),
              ("inferred mean", "#d62728"), ("excavator", "#2ca02c")])
    return c.render()


def plot_simulated(sims, truth_xy, truth_labels) -> str:
    """(d) simulated points (black) over recorded dig points."""
    truth_xy = np.asarray(truth_xy, dtype=float)[:, :2]
    labels = np.asarray(truth_labels)
    sim_pts = [s.points for s in sims]
    c = Canvas(np.vstack([truth_xy, *sim_pts]), "Simulated (black) vs recorded dig points")
    for k in sorted(set(labels.tolist())):
        c.open_group("recorded", label=k)
        c.dots(truth_xy[labels == k], colour(k), opacity=0.7)
        c.close_group()
    for s in sims:
        c.open_group("simulated", label=s.cluster_id)
        c.dots(s.points, "#000000", r=2.0)
        c.close_group()
    return c.render()


def emit_plots(out_dir, figures: dict) -> list[Path]:
    """Write ``{name: callable returning SVG text}`` to ``out_dir/plots``.

    Failures are logged and skipped; plots never fail a run.
    """
    plot_dir = Path(out_dir) / "plots"
    plot_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, make in figures.items():
        try:
            svg = make()
        except Exception as exc:  # best-effort output
            log.warning("plot %s skipped: %s", name, exc)
            continue
        path = plot_dir / f"{name}.svg"
        path.write_text(svg)
        written.append(path)
    return written
