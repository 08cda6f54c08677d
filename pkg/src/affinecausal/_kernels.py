"""Numba-compiled recursions shared by simulation and likelihood evaluation.

All kernels treat unknown pre-sample values as zero, except recursive
variance states which are passed in explicitly (``h0``/``s0``).
"""

import numpy as np
from numba import njit


@njit(cache=True)
def simulate_arma(noise, sigma, ar, ma):
    """X_t = sum ar_i X_{t-i} + eps_t - sum ma_j eps_{t-j}, eps_t = sigma*noise_t."""
    n = noise.shape[0]
    p = ar.shape[0]
    q = ma.shape[0]
    x = np.empty(n)
    eps = np.empty(n)
    for t in range(n):
        e = sigma * noise[t]
        eps[t] = e
        s = e
        for i in range(p):
            k = t - 1 - i
            if k >= 0:
                s += ar[i] * x[k]
        for j in range(q):
            k = t - 1 - j
            if k >= 0:
                s -= ma[j] * eps[k]
        x[t] = s
    return x


@njit(cache=True)
def simulate_garch(noise, c0, c, d, h0):
    """X_t = sqrt(h_t) noise_t with h_t = c0 + sum c_i X_{t-i}^2 + sum d_j h_{t-j}."""
    n = noise.shape[0]
    p = c.shape[0]
    q = d.shape[0]
    x = np.empty(n)
    h = np.empty(n)
    for t in range(n):
        v = c0
        for i in range(p):
            k = t - 1 - i
            if k >= 0:
                v += c[i] * x[k] * x[k]
        for j in range(q):
            k = t - 1 - j
            if k >= 0:
                v += d[j] * h[k]
            else:
                v += d[j] * h0
        if v < 0.0:
            v = 0.0
        h[t] = v
        x[t] = np.sqrt(v) * noise[t]
    return x


@njit(cache=True)
def simulate_aparch(noise, omega, alpha, gamma, beta, delta, s0):
    """APARCH recursion on sigma^delta; X_t = sigma_t noise_t."""
    n = noise.shape[0]
    p = alpha.shape[0]
    q = beta.shape[0]
    x = np.empty(n)
    s = np.empty(n)
    for t in range(n):
        v = omega
        for i in range(p):
            k = t - 1 - i
            if k >= 0:
                v += alpha[i] * (abs(x[k]) - gamma[i] * x[k]) ** delta
        for j in range(q):
            k = t - 1 - j
            if k >= 0:
                v += beta[j] * s[k]
            else:
                v += beta[j] * s0
        if v < 0.0:
            v = 0.0
        s[t] = v
        x[t] = v ** (1.0 / delta) * noise[t]
    return x


@njit(cache=True)
def simulate_ar_archinf(noise, omega, alpha, phi, weights):
    """AR(p) driven by an ARCH(inf) noise with weight sequence ``weights``."""
    n = noise.shape[0]
    p = phi.shape[0]
    trunc = weights.shape[0]
    x = np.empty(n)
    xi = np.empty(n)
    for t in range(n):
        v = omega
        kmax = min(t, trunc)
        for i in range(1, kmax + 1):
            v += alpha * weights[i - 1] * xi[t - i] * xi[t - i]
        if v < 0.0:
            v = 0.0
        xi[t] = np.sqrt(v) * noise[t]
        s = xi[t]
        for i in range(p):
            k = t - 1 - i
            if k >= 0:
                s += phi[i] * x[k]
        x[t] = s
    return x


@njit(cache=True)
def arma_innovations(x, ar, ma):
    """eps_t = x_t - sum ar_i x_{t-i} + sum ma_j eps_{t-j} with zero pre-samples."""
    n = x.shape[0]
    p = ar.shape[0]
    q = ma.shape[0]
    eps = np.empty(n)
    for t in range(n):
        s = x[t]
        for i in range(p):
            k = t - 1 - i
            if k >= 0:
                s -= ar[i] * x[k]
        for j in range(q):
            k = t - 1 - j
            if k >= 0:
                s += ma[j] * eps[k]
        eps[t] = s
    return eps


@njit(cache=True)
def garch_variance(z2, c0, c, d, h0):
    """h_t = c0 + sum c_i z2_{t-i} + sum d_j h_{t-j}; pre-sample z2=0, h=h0."""
    n = z2.shape[0]
    p = c.shape[0]
    q = d.shape[0]
    h = np.empty(n)
    for t in range(n):
        v = c0
        for i in range(p):
            k = t - 1 - i
            if k >= 0:
                v += c[i] * z2[k]
        for j in range(q):
            k = t - 1 - j
            if k >= 0:
                v += d[j] * h[k]
            else:
                v += d[j] * h0
        h[t] = v
    return h


@njit(cache=True)
def aparch_power_variance(x, omega, alpha, gamma, beta, delta, s0):
    """sigma_t^delta recursion conditional on the observed series."""
    n = x.shape[0]
    p = alpha.shape[0]
    q = beta.shape[0]
    s = np.empty(n)
    for t in range(n):
        v = omega
        for i in range(p):
            k = t - 1 - i
            if k >= 0:
                v += alpha[i] * (abs(x[k]) - gamma[i] * x[k]) ** delta
        for j in range(q):
            k = t - 1 - j
            if k >= 0:
                v += beta[j] * s[k]
            else:
                v += beta[j] * s0
        s[t] = v
    return s
