#!/usr/bin/env python3
"""Generates the scene files in tracks/.

Usage: python3 tools/make_tracks.py [output_dir]
"""
import math
import random
import sys
from pathlib import Path


def fmt(v):
    return repr(round(v, 6) + 0.0)


def closed_polyline(points):
    return [(points[i], points[(i + 1) % len(points)]) for i in range(len(points))]


def cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def segments_cross(s, t):
    d1, d2 = cross(t[0], t[1], s[0]), cross(t[0], t[1], s[1])
    d3, d4 = cross(s[0], s[1], t[0]), cross(s[0], s[1], t[1])
    return d1 * d2 < 0 and d3 * d4 < 0


def check_simple(segments, label):
    for i, s in enumerate(segments):
        for t in segments[i + 2:]:
            if s[0] == t[1] or s[1] == t[0]:
                continue
            if segments_cross(s, t):
                raise SystemExit(f"{label}: walls self-intersect")


def write_scene(path, name, bounds, start, segments, circles=(), finish=None):
    lines = [f"# generated by tools/make_tracks.py", f"name {name}",
             "bounds " + " ".join(fmt(v) for v in bounds),
             "start " + " ".join(fmt(v) for v in start)]
    if finish:
        lines.append("finish " + " ".join(fmt(v) for v in (*finish[0], *finish[1])))
    for a, b in segments:
        lines.append(f"segment {fmt(a[0])} {fmt(a[1])} {fmt(b[0])} {fmt(b[1])}")
    for c in circles:
        lines.append("circle " + " ".join(fmt(v) for v in c))
    path.write_text("\n".join(lines) + "\n")


def stadium(straight, radius, n_arc):
    """Closed stadium curve centered at the origin, counter-clockwise, starting on the bottom straight."""
    half = straight / 2
    pts = [(-half, -radius), (half, -radius)]
    for i in range(1, n_arc):
        a = -math.pi / 2 + math.pi * i / n_arc
        pts.append((half + radius * math.cos(a), radius * math.sin(a)))
    pts += [(half, radius), (-half, radius)]
    for i in range(1, n_arc):
        a = math.pi / 2 + math.pi * i / n_arc
        pts.append((-half + radius * math.cos(a), radius * math.sin(a)))
    return pts


OVAL_STRAIGHT = 12.0
OVAL_RADIUS = 4.0
OVAL_WIDTH = 3.0


def oval_walls():
    inner = stadium(OVAL_STRAIGHT, OVAL_RADIUS - OVAL_WIDTH / 2, 24)
    outer = stadium(OVAL_STRAIGHT, OVAL_RADIUS + OVAL_WIDTH / 2, 24)
    walls = closed_polyline(inner) + closed_polyline(outer)
    check_simple(closed_polyline(inner), "oval inner")
    check_simple(closed_polyline(outer), "oval outer")
    return walls


def corridor_oval(out):
    y_in, y_out = -(OVAL_RADIUS - OVAL_WIDTH / 2), -(OVAL_RADIUS + OVAL_WIDTH / 2)
    write_scene(out / "corridor_oval.scene", "corridor_oval", (-12, -10, 12, 10), (0.3, -OVAL_RADIUS, 0.0),
                oval_walls(), finish=((0.0, y_out), (0.0, y_in)))


def corridor_crossing(out):
    # Nominal crossing: the obstacle rises through the outer wall and meets a
    # vehicle cruising at 1 m/s near x = 4 on the bottom straight.
    y_in, y_out = -(OVAL_RADIUS - OVAL_WIDTH / 2), -(OVAL_RADIUS + OVAL_WIDTH / 2)
    circle = (4.0, -OVAL_RADIUS - 4.2, 0.3, 0.0, 1.0)
    write_scene(out / "corridor_crossing.scene", "corridor_crossing", (-12, -14, 12, 14), (0.3, -OVAL_RADIUS, 0.0),
                oval_walls(), circles=[circle], finish=((0.0, y_out), (0.0, y_in)))


def training(out):
    n, width = 360, 2.4

    def center(t):
        r = 8 + 1.8 * math.sin(3 * t) + 0.5 * math.cos(5 * t + 0.5)
        return r * math.cos(t), r * math.sin(t)

    inner, outer = [], []
    for i in range(n):
        t = 2 * math.pi * i / n
        x, y = center(t)
        xa, ya = center(t - 1e-4)
        xb, yb = center(t + 1e-4)
        tx, ty = xb - xa, yb - ya
        norm = math.hypot(tx, ty)
        nx, ny = -ty / norm, tx / norm  # left normal, pointing inward for counter-clockwise travel
        inner.append((x + nx * width / 2, y + ny * width / 2))
        outer.append((x - nx * width / 2, y - ny * width / 2))
    check_simple(closed_polyline(inner), "training inner")
    check_simple(closed_polyline(outer), "training outer")
    sx, sy = center(0.02)
    ax, ay = center(0.02 - 1e-4)
    bx, by = center(0.02 + 1e-4)
    yaw = math.atan2(by - ay, bx - ax)
    write_scene(out / "training.scene", "training", (-15, -15, 15, 15), (sx, sy, yaw),
                closed_polyline(inner) + closed_polyline(outer), finish=(inner[0], outer[0]))


def outdoor(out):
    rng = random.Random(7)
    circles = []
    while len(circles) < 45:
        x, y, r = rng.uniform(-23, 23), rng.uniform(-23, 23), rng.uniform(0.3, 1.0)
        if math.hypot(x, y) < 4 + r:
            continue
        if any(math.hypot(x - c[0], y - c[1]) < r + c[2] + 1.2 for c in circles):
            continue
        circles.append((x, y, r))
    write_scene(out / "outdoor.scene", "outdoor", (-25, -25, 25, 25), (0.0, 0.0, 0.0), [], circles=circles)


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "tracks"
    out.mkdir(parents=True, exist_ok=True)
    corridor_oval(out)
    corridor_crossing(out)
    training(out)
    outdoor(out)


if __name__ == "__main__":
    main()
