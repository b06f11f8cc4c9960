"""Fused per-path forward/backward pass for the sample objective (numba).

Mirrors SampleObjective._forward / value_and_grad path by path, keeping the
per-period state in small scratch arrays instead of (L, ...) temporaries.
"""
import math

import numba
import numpy as np

ASYMMETRIC, SHORTFALL = 0, 1


@numba.njit(cache=True)
def _sigmoid_neg(s):
    # 1 / (1 + e^s), evaluated without overflow
    if s > 0:
        e = math.exp(-s)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(s))


@numba.njit(cache=True)
def value_and_grad(R, Wb, target, t, z, x, q, horizon, w_norm, mode, eps, want_grad):
    L, N, M = R.shape
    d, l = z.shape
    total = 0.0
    dz = np.zeros((d, l))
    dx = np.zeros((l, M))
    F = np.empty((N, d))
    H = np.empty((N, l))
    P = np.empty((N, M))
    A = np.empty(N)
    G = np.empty(N)
    u = np.empty(M)
    v = np.empty(M)
    du = np.empty(M)
    ds = np.empty(l)
    for i in range(L):
        W = 0.0
        for n in range(N):
            F[n, 0] = (horizon - t[n]) / horizon
            F[n, 1] = W / w_norm
            F[n, 2] = Wb[i, n] / w_norm
            for j in range(l):
                s = 0.0
                for k in range(d):
                    s += F[n, k] * z[k, j]
                H[n, j] = _sigmoid_neg(s)
            umax = -np.inf
            for m in range(M):
                acc = 0.0
                for j in range(l):
                    acc += H[n, j] * x[j, m]
                u[m] = acc
                if acc > umax:
                    umax = acc
            norm = 0.0
            for m in range(M):
                u[m] = math.exp(u[m] - umax)
                norm += u[m]
            growth = 0.0
            for m in range(M):
                P[n, m] = u[m] / norm
                growth += P[n, m] * R[i, n, m]
            A[n] = W + q
            G[n] = growth
            W = growth * A[n]
        dterm = W - target[i]
        if mode == ASYMMETRIC:
            if dterm > eps:
                loss, dloss = dterm, 1.0
            elif dterm < -eps:
                loss, dloss = (dterm + eps) ** 2, 2.0 * (dterm + eps)
            else:
                loss = dterm * dterm / (4.0 * eps) + 0.5 * dterm + 0.25 * eps
                dloss = dterm / (2.0 * eps) + 0.5
        else:
            neg = min(dterm, 0.0)
            loss, dloss = neg * neg, 2.0 * neg
        total += loss
        if not want_grad:
            continue
        lam = dloss / L
        for n in range(N - 1, -1, -1):
            pv = 0.0
            for m in range(M):
                v[m] = lam * A[n] * R[i, n, m]
                pv += P[n, m] * v[m]
            for m in range(M):
                du[m] = P[n, m] * (v[m] - pv)
            for j in range(l):
                acc = 0.0
                for m in range(M):
                    dx[j, m] += H[n, j] * du[m]
                    acc += du[m] * x[j, m]
                ds[j] = -acc * H[n, j] * (1.0 - H[n, j])
            dF1 = 0.0
            for k in range(d):
                for j in range(l):
                    dz[k, j] += F[n, k] * ds[j]
            for j in range(l):
                dF1 += ds[j] * z[1, j]
            lam = lam * G[n] + dF1 / w_norm
    return total / L, dz, dx
