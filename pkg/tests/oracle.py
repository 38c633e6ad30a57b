"""Straight-line reference stepper used to cross-check the vectorized engine.

Works on plain Python lists of lifted positions and spells out every case
with explicit branches.  It shares no code with the package.
"""


def _gaps(xs, L, r):
    n = len(xs)
    out = []
    for i in range(n):
        if i + 1 < n:
            nxt = xs[i + 1]
        else:
            nxt = xs[0] + L
        out.append(nxt - xs[i] - 2 * r)
    return out


def _move(kind, v, gap_left, gap_right, v_left, v_right):
    if kind == "WeakNonneg":
        if v <= gap_right:
            return v
        return gap_right
    if kind == "StrongNonneg":
        if v <= gap_right:
            return v
        return 0
    if v == 0:
        return 0
    if kind == "StrongBoth":
        if v > 0:
            # the right gap must absorb our move plus any approach from the right
            approach = v - min(v_right, 0)
            return v if gap_right >= approach else 0
        approach = -v + max(v_left, 0)
        return v if gap_left >= approach else 0
    # WeakBothContinuous
    if v > 0:
        if v_right >= 0:
            return v if v <= gap_right else gap_right
        closing = v - v_right
        if closing <= gap_right:
            return v
        return v * (gap_right / closing)
    if v_left <= 0:
        return v if -v <= gap_left else -gap_left
    closing = v_left - v
    if closing <= gap_left:
        return v
    return v * (gap_left / closing)


def oracle_step(xs, vs, L, r, kind):
    """Lifted positions after one synchronous step."""
    n = len(xs)
    if n == 1:
        return [xs[0] + vs[0]]
    g = _gaps(xs, L, r)
    new = []
    for i in range(n):
        left = (i - 1) % n
        right = (i + 1) % n
        d = _move(kind, vs[i], g[left], g[i], vs[left], vs[right])
        new.append(xs[i] + d)
    return new


def oracle_run(xs, velocity_rows, L, r, kind):
    for vs in velocity_rows:
        xs = oracle_step(xs, vs, L, r, kind)
    return xs
