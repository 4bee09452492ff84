"""Pure numpy fallback for the compiled kernels in ``_kernels.pyx``.

Vectorised over evaluation points, looping over sources.  The calling
convention matches the compiled module exactly.
"""
import math

import numpy as np

# Taylor coefficients of G(m)/m, G = (1 - m/2) E(m) - (1 - m) K(m), without the pi/2
# factor; G vanishes like m^2, so evaluating it from K and E cancels badly near
# the loop axis.
_G_SERIES = (
    0.1875, 0.046875, 0.02197265625,
    0.0128173828125, 0.008411407470703125, 0.005948066711425781,
    0.004430070519447327, 0.0034280307590961456, 0.002731712011154741,
    0.002228138837381266, 0.0018521404085731774, 0.0015639577226238544,
    0.0013382078727808278, 0.001158064505291101, 0.0010120139594229152,
    0.0008919613230600008, 0.0007920802374048444, 0.0007080903051103679,
    0.0006367895452207823, 0.0005757439309233012,
)
SERIES_M = 0.1


def g_over_m(m, K, E):
    """(1 - m/2) E - (1 - m) K, divided by m; series below ``SERIES_M``."""
    m = np.asarray(m, dtype=float)
    series = np.zeros_like(m)
    for c in reversed(_G_SERIES):
        series = (series + c) * m
    series *= 0.5 * math.pi
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = ((1.0 - 0.5 * m) * E - (1.0 - m) * K) / m
    return np.where(m < SERIES_M, series, direct)


def ellipke(m):
    """Complete elliptic integrals K(m), E(m) by the arithmetic-geometric mean."""
    m = np.asarray(m, dtype=float)
    a = np.ones_like(m)
    b = np.sqrt(1.0 - m)
    acc = 0.5 * m
    w = 0.5
    for _ in range(64):
        if np.all(np.abs(a - b) <= 1e-15 * a):
            break
        c = 0.5 * (a - b)
        b = np.sqrt(a * b)
        a = a - c
        w *= 2.0
        acc = acc + w * c * c
    K = math.pi / (2.0 * a)
    E = K * (1.0 - acc)
    if K.ndim == 0:
        return float(K), float(E)
    return K, E


def _singular(pts, segs, loops, guard, info):
    """Fill ``info`` for the lowest-index point on any filament; segments before loops."""
    hits = []
    for j, (sx, sy, sz, ex, ey, ez, _) in enumerate(np.asarray(segs)):
        s = np.array([sx, sy, sz])
        u = np.array([ex, ey, ez]) - s
        length = math.sqrt(u @ u)
        u = u / length
        r1 = pts - s
        t = r1 @ u
        q = r1 - t[:, None] * u
        bad = (np.sqrt(np.einsum("ij,ij->i", q, q)) <= guard) & (t >= -guard) & (t <= length + guard)
        hits += [(i, 1, j) for i in np.flatnonzero(bad)[:1]]
    for j, (cx, cy, cz, nx, ny, nz, R, _) in enumerate(np.asarray(loops)):
        n = np.array([nx, ny, nz])
        d = pts - np.array([cx, cy, cz])
        z = d @ n
        q = d - z[:, None] * n
        rho = np.sqrt(np.einsum("ij,ij->i", q, q))
        bad = np.sqrt((R - rho) ** 2 + z * z) <= guard
        hits += [(i, 2, j) for i in np.flatnonzero(bad)[:1]]
    if not hits:
        return 0
    i, kind, j = min(hits)
    info[0], info[1], info[2] = kind, j, i
    return 1


def field_points(pts, segs, loops, bias, guard, mu0, out, info):
    pts = np.asarray(pts)
    if _singular(pts, segs, loops, guard, info):
        return 1
    B = np.broadcast_to(np.asarray(bias), pts.shape).copy()
    for j, (sx, sy, sz, ex, ey, ez, current) in enumerate(np.asarray(segs)):
        s = np.array([sx, sy, sz])
        u = np.array([ex, ey, ez]) - s
        length = math.sqrt(u @ u)
        u = u / length
        r1 = pts - s
        t = r1 @ u
        q = r1 - t[:, None] * u
        rho2 = np.einsum("ij,ij->i", q, q)
        on_axis = np.sqrt(rho2) <= guard
        if current == 0.0:
            continue
        r2 = pts - np.array([ex, ey, ez])
        t2 = r2 @ u
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = mu0 * current / (4.0 * math.pi) * (
                t / np.sqrt(np.einsum("ij,ij->i", r1, r1))
                - t2 / np.sqrt(np.einsum("ij,ij->i", r2, r2))) / rho2
        fac[on_axis] = 0.0
        B += fac[:, None] * np.cross(u, r1)
    for j, (cx, cy, cz, nx, ny, nz, R, current) in enumerate(np.asarray(loops)):
        n = np.array([nx, ny, nz])
        d = pts - np.array([cx, cy, cz])
        z = d @ n
        q = d - z[:, None] * n
        rho = np.sqrt(np.einsum("ij,ij->i", q, q))
        alpha2 = (R - rho) ** 2 + z * z
        if current == 0.0:
            continue
        beta2 = (R + rho) ** 2 + z * z
        beta = np.sqrt(beta2)
        m = 4.0 * R * rho / beta2
        K, E = ellipke(m)
        C = mu0 * current / math.pi
        Bz = C / (2.0 * alpha2 * beta) * ((R * R - rho * rho - z * z) * E + alpha2 * K)
        # alpha^2 = beta^2 (1 - m) and R^2 + rho^2 + z^2 = beta^2 (1 - m/2)
        Brho = 2.0 * C * z * R * g_over_m(m, K, E) / (alpha2 * beta)
        with np.errstate(divide="ignore", invalid="ignore"):
            radial = np.where(rho[:, None] > 0.0, q / rho[:, None], 0.0)
        B += Brho[:, None] * radial + Bz[:, None] * n
    out[...] = B
    return 0
