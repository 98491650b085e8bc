"""Vectorised SE(2) helpers. Poses are (x, y, yaw) triples of arrays or scalars."""

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_angle(a):
    """Map angles to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    out = a - TWO_PI * np.ceil((a - np.pi) / TWO_PI)
    # ceil can land one period off when a - pi is an exact multiple after rounding
    out = np.where(out <= -np.pi, out + TWO_PI, out)
    out = np.where(out > np.pi, out - TWO_PI, out)
    return out if out.ndim else float(out)


def rotate(yaw, vx, vy):
    c, s = np.cos(yaw), np.sin(yaw)
    return c * vx - s * vy, s * vx + c * vy


def compose(a, b):
    """a * b for pose triples (broadcasting)."""
    ax, ay, ayaw = a
    bx, by, byaw = b
    dx, dy = rotate(ayaw, bx, by)
    return ax + dx, ay + dy, wrap_angle(np.asarray(ayaw) + byaw)


def inverse(a):
    ax, ay, ayaw = a
    x, y = rotate(-np.asarray(ayaw), ax, ay)
    return -x, -y, wrap_angle(-np.asarray(ayaw))


def between(a, b):
    """a^-1 * b."""
    return compose(inverse(a), b)


def angle_diff(a, b):
    """Shortest signed arc from b to a."""
    return wrap_angle(np.asarray(a) - np.asarray(b))
