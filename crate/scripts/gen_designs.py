#!/usr/bin/env python3
"""Compute numerical spherical t-designs on S^2 for the bundled design directory.

Symmetric (antipodal) designs are produced for odd t, general designs for even
t. Each design is found with a minimum-norm Gauss-Newton / Levenberg-Marquardt
iteration on the vector of spherical-harmonic moments, starting from spiral
points. Output files hold one point per line (x y z, 17 significant digits).

Usage: gen_designs.py OUT_DIR [t ...]
"""

import math
import sys
from pathlib import Path

import numpy as np


def real_sh_with_grad(pts, degrees):
    """Orthonormal real spherical harmonics (surface measure) for the given
    degrees, evaluated at unit vectors pts (n, 3). Returns (Y, dY) with
    Y of shape (K, n) and dY of shape (K, n, 3), the ambient gradient of the
    polynomial extension."""
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    n = pts.shape[0]
    lmax = max(degrees)
    # q[l][m] = normalized P_l^m(z) / sin^m(theta), a polynomial in z
    q = {}
    dq = {}
    q[(0, 0)] = np.full(n, 1.0 / math.sqrt(4.0 * math.pi))
    dq[(0, 0)] = np.zeros(n)
    for m in range(1, lmax + 1):
        f = -math.sqrt((2 * m + 1) / (2.0 * m))
        q[(m, m)] = f * q[(m - 1, m - 1)]
        dq[(m, m)] = np.zeros(n)
    for m in range(0, lmax):
        f = math.sqrt(2 * m + 3)
        q[(m + 1, m)] = f * z * q[(m, m)]
        dq[(m + 1, m)] = f * q[(m, m)]
    for m in range(0, lmax + 1):
        for l in range(m + 2, lmax + 1):
            a = math.sqrt((4.0 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1) ** 2 - m * m) / (4.0 * (l - 1) ** 2 - 1))
            q[(l, m)] = a * (z * q[(l - 1, m)] - b * q[(l - 2, m)])
            dq[(l, m)] = a * (q[(l - 1, m)] + z * dq[(l - 1, m)] - b * dq[(l - 2, m)])
    # (x + i y)^m and its derivative
    w = x + 1j * y
    pw = [np.ones(n, dtype=complex)]
    for m in range(1, lmax + 1):
        pw.append(pw[-1] * w)
    rows = []
    grads = []
    s2 = math.sqrt(2.0)
    for l in degrees:
        for m in range(0, l + 1):
            qv, dqv = q[(l, m)], dq[(l, m)]
            p = pw[m]
            dp = m * pw[m - 1] if m > 0 else np.zeros(n, dtype=complex)
            if m == 0:
                rows.append(qv)
                grads.append(np.stack([np.zeros(n), np.zeros(n), dqv], axis=1))
                continue
            for part in (np.real, np.imag):
                val = s2 * qv * part(p)
                if part is np.real:
                    gx = s2 * qv * np.real(dp)
                    gy = s2 * qv * np.real(1j * dp)
                else:
                    gx = s2 * qv * np.imag(dp)
                    gy = s2 * qv * np.imag(1j * dp)
                gz = s2 * dqv * part(p)
                rows.append(val)
                grads.append(np.stack([gx, gy, gz], axis=1))
    return np.array(rows), np.array(grads)


def tangent_frame(pts):
    a = np.where(np.abs(pts[:, [0]]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
    e1 = np.cross(pts, a)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(pts, e1)
    return e1, e2


def spiral(n):
    j = np.arange(1, n + 1)
    alpha = np.arccos(1.0 - (2 * j - 1) / n)
    beta = np.mod(1.8 * math.sqrt(n) * alpha, 2 * math.pi)
    return np.stack([np.sin(alpha) * np.cos(beta), np.sin(alpha) * np.sin(beta), np.cos(alpha)], axis=1)


def solve(free, degrees, factor, max_iter=200, tol=1e-12):
    """Minimum-norm damped Gauss-Newton on the moment residual."""
    mu = 1e-3
    Y, _ = real_sh_with_grad(free, degrees)
    r = factor * Y.sum(axis=1)
    norm = np.linalg.norm(r)
    for _ in range(max_iter):
        if norm < tol:
            break
        Y, dY = real_sh_with_grad(free, degrees)
        e1, e2 = tangent_frame(free)
        J = np.concatenate([factor * np.einsum("kni,ni->kn", dY, e1),
                            factor * np.einsum("kni,ni->kn", dY, e2)], axis=1)
        JJt = J @ J.T
        improved = False
        for _ in range(30):
            A = JJt + mu * np.eye(JJt.shape[0])
            step = -J.T @ np.linalg.solve(A, r)
            n = free.shape[0]
            u, v = step[:n], step[n:]
            cand = free + u[:, None] * e1 + v[:, None] * e2
            cand /= np.linalg.norm(cand, axis=1, keepdims=True)
            Yc, _ = real_sh_with_grad(cand, degrees)
            rc = factor * Yc.sum(axis=1)
            nc = np.linalg.norm(rc)
            if nc < norm:
                free, r, norm = cand, rc, nc
                mu = max(mu / 10.0, 1e-15)
                improved = True
                break
            mu *= 10.0
        if not improved:
            break
    return free, norm


def symmetric_count(t):
    s = (t - 1) // 2
    n = 2 * s * s + 3 * s + 3
    return n + (n % 2)


def general_count(t):
    c = (t + 1) ** 2 - 1
    return (c + 3 + 1) // 2


def design(t):
    if t == 1:
        return np.array([[0, 0, 1.0], [0, 0, -1.0]])
    if t % 2 == 1:
        degrees = list(range(2, t, 2))
        n = max(symmetric_count(t), 6)
        while True:
            start = spiral(2 * n)
            free = start[start[:, 2] > 0][: n // 2]
            free, res = solve(free, degrees, 2.0)
            if res < 1e-10:
                return np.concatenate([free, -free])
            print(f"  t={t} n={n}: residual {res:.2e}, retrying with n+2", file=sys.stderr)
            n += 2
    degrees = list(range(1, t + 1))
    n = max(general_count(t), 4)
    while True:
        free, res = solve(spiral(n), degrees, 1.0)
        if res < 1e-10:
            return free
        print(f"  t={t} n={n}: residual {res:.2e}, retrying with n+1", file=sys.stderr)
        n += 1


def main():
    out = Path(sys.argv[1])
    out.mkdir(parents=True, exist_ok=True)
    for t in map(int, sys.argv[2:]):
        pts = design(t)
        kind = "ss" if t % 2 == 1 else "sf"
        path = out / f"{kind}{t:03d}.{pts.shape[0]:05d}"
        with open(path, "w") as fh:
            for p in pts:
                fh.write(" ".join(f"{c: .17e}" for c in p) + "\n")
        print(f"t={t}: {pts.shape[0]} points -> {path.name}", file=sys.stderr)


if __name__ == "__main__":
    main()
