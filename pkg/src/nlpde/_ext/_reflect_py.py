"""NumPy implementation of the reflection kernels."""
import numpy as np


def reflect_batch(a, b, lower, upper, max_bounces):
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    counts = np.zeros(len(b), dtype=np.int64)
    outside = (b < lower) | (b > upper)
    active = np.flatnonzero(outside.any(axis=1))
    while active.size:
        aa = a[active]
        bb = b[active]
        delta = bb - aa
        above = bb > upper
        below = bb < lower
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(above, (upper - aa) / delta, np.inf)
            r = np.where(below, (lower - aa) / delta, r)
        # argmin returns the first minimum: ties go to the lowest coordinate
        j = np.argmin(r, axis=1)
        rows = np.arange(active.size)
        rj = np.clip(r[rows, j], 0.0, 1.0)
        crossing = np.clip(aa + rj[:, None] * delta, lower, upper)
        face = np.where(above[rows, j], upper[j], lower[j])
        crossing[rows, j] = face
        bb[rows, j] = 2.0 * face - bb[rows, j]
        a[active] = crossing
        b[active] = bb
        counts[active] += 1
        still = ((bb < lower) | (bb > upper)).any(axis=1)
        over = still & (counts[active] >= max_bounces)
        if over.any():
            return b, counts, int(active[np.argmax(over)])
        active = active[still]
    return b, counts, -1


def fold_batch(b, lower, upper):
    b = np.asarray(b, dtype=np.float64)
    width = upper - lower
    y = np.mod(b - lower, 2.0 * width)
    y = np.where(y > width, 2.0 * width - y, y)
    return lower + y
