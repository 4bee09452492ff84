# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Biot-Savart kernels.

Same calling convention as ``_kernels_py.field_points``: fills ``out`` and
returns 0, or returns a nonzero status with ``info = (kind, source, point)``
where kind is 1 for a wire segment and 2 for a loop.
"""
from libc.math cimport sqrt, fabs, M_PI


# Taylor coefficients of G(m)/m, G = (1 - m/2) E(m) - (1 - m) K(m), without the pi/2
# factor (see _kernels_py); used below m = 0.1 where K and E cancel.
cdef double[20] _G_SERIES = [
    0.1875, 0.046875, 0.02197265625,
    0.0128173828125, 0.008411407470703125, 0.005948066711425781,
    0.004430070519447327, 0.0034280307590961456, 0.002731712011154741,
    0.002228138837381266, 0.0018521404085731774, 0.0015639577226238544,
    0.0013382078727808278, 0.001158064505291101, 0.0010120139594229152,
    0.0008919613230600008, 0.0007920802374048444, 0.0007080903051103679,
    0.0006367895452207823, 0.0005757439309233012,
]


cdef inline double _g_over_m(double m, double K, double E) noexcept nogil:
    cdef double acc = 0.0
    cdef int j
    if m < 0.1:
        for j in range(19, -1, -1):
            acc = (acc + _G_SERIES[j]) * m
        return 0.5 * M_PI * acc
    return ((1.0 - 0.5 * m) * E - (1.0 - m) * K) / m


cdef inline void _ellipke(double m, double* K, double* E) noexcept nogil:
    cdef double a = 1.0
    cdef double b = sqrt(1.0 - m)
    cdef double c
    cdef double acc = 0.5 * m
    cdef double w = 0.5
    cdef int it
    for it in range(64):
        if fabs(a - b) <= 1e-15 * a:
            break
        c = 0.5 * (a - b)
        b = sqrt(a * b)
        a = a - c
        w *= 2.0
        acc += w * c * c
    K[0] = M_PI / (2.0 * a)
    E[0] = K[0] * (1.0 - acc)


def ellipke(double m):
    cdef double K, E
    _ellipke(m, &K, &E)
    return K, E


cdef int _field_points(double[:, ::1] pts, double[:, ::1] segs, double[:, ::1] loops,
                       double[::1] bias, double guard, double mu0,
                       double[:, ::1] out, long[::1] info) noexcept nogil:
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t ns = segs.shape[0]
    cdef Py_ssize_t nl = loops.shape[0]
    cdef Py_ssize_t i, j
    cdef double px, py, pz, bx, by, bz
    cdef double ux, uy, uz, L, r1x, r1y, r1z, t, qx, qy, qz, rho2, rho
    cdef double r2x, r2y, r2z, t2, fac, I
    cdef double cx, cy, cz, nx, ny, nz, R, dx, dy, dz, z, alpha2, beta2, beta
    cdef double m, K, E, C, Bz, Brho
    for i in range(n):
        px = pts[i, 0]
        py = pts[i, 1]
        pz = pts[i, 2]
        bx = bias[0]
        by = bias[1]
        bz = bias[2]
        for j in range(ns):
            I = segs[j, 6]
            ux = segs[j, 3] - segs[j, 0]
            uy = segs[j, 4] - segs[j, 1]
            uz = segs[j, 5] - segs[j, 2]
            L = sqrt(ux * ux + uy * uy + uz * uz)
            ux = ux / L
            uy = uy / L
            uz = uz / L
            r1x = px - segs[j, 0]
            r1y = py - segs[j, 1]
            r1z = pz - segs[j, 2]
            t = r1x * ux + r1y * uy + r1z * uz
            qx = r1x - t * ux
            qy = r1y - t * uy
            qz = r1z - t * uz
            rho2 = qx * qx + qy * qy + qz * qz
            rho = sqrt(rho2)
            if rho <= guard:
                if t >= -guard and t <= L + guard:
                    info[0] = 1
                    info[1] = j
                    info[2] = i
                    return 1
                continue
            if I == 0.0:
                continue
            r2x = px - segs[j, 3]
            r2y = py - segs[j, 4]
            r2z = pz - segs[j, 5]
            t2 = r2x * ux + r2y * uy + r2z * uz
            fac = mu0 * I / (4.0 * M_PI) * (
                t / sqrt(r1x * r1x + r1y * r1y + r1z * r1z)
                - t2 / sqrt(r2x * r2x + r2y * r2y + r2z * r2z)) / rho2
            bx += fac * (uy * r1z - uz * r1y)
            by += fac * (uz * r1x - ux * r1z)
            bz += fac * (ux * r1y - uy * r1x)
        for j in range(nl):
            cx = loops[j, 0]
            cy = loops[j, 1]
            cz = loops[j, 2]
            nx = loops[j, 3]
            ny = loops[j, 4]
            nz = loops[j, 5]
            R = loops[j, 6]
            I = loops[j, 7]
            dx = px - cx
            dy = py - cy
            dz = pz - cz
            z = dx * nx + dy * ny + dz * nz
            qx = dx - z * nx
            qy = dy - z * ny
            qz = dz - z * nz
            rho = sqrt(qx * qx + qy * qy + qz * qz)
            alpha2 = (R - rho) * (R - rho) + z * z
            if sqrt(alpha2) <= guard:
                info[0] = 2
                info[1] = j
                info[2] = i
                return 1
            if I == 0.0:
                continue
            beta2 = (R + rho) * (R + rho) + z * z
            beta = sqrt(beta2)
            m = 4.0 * R * rho / beta2
            _ellipke(m, &K, &E)
            C = mu0 * I / M_PI
            Bz = C / (2.0 * alpha2 * beta) * ((R * R - rho * rho - z * z) * E + alpha2 * K)
            # alpha^2 = beta^2 (1 - m) and R^2 + rho^2 + z^2 = beta^2 (1 - m/2)
            Brho = 2.0 * C * z * R * _g_over_m(m, K, E) / (alpha2 * beta)
            if rho > 0.0:
                bx += Brho * qx / rho
                by += Brho * qy / rho
                bz += Brho * qz / rho
            bx += Bz * nx
            by += Bz * ny
            bz += Bz * nz
        out[i, 0] = bx
        out[i, 1] = by
        out[i, 2] = bz
    return 0


def field_points(double[:, ::1] pts, double[:, ::1] segs, double[:, ::1] loops,
                 double[::1] bias, double guard, double mu0,
                 double[:, ::1] out, long[::1] info):
    cdef int status
    with nogil:
        status = _field_points(pts, segs, loops, bias, guard, mu0, out, info)
    return status
