"""Independent reference calculations used by the tests.

Nothing here imports the package; each function is a direct, slow
transcription of a closed form or a textbook method.
"""
import numpy as np
from scipy.stats import norm


def transfer_matrix_T(k, segments):
    """Stationary |t(k)|^2 for piecewise-constant V, with q^2 = k^2 - V (reduced units).

    segments: list of (left, right, height), contiguous or not, sorted.
    """
    bounds, heights = [], [0.0]
    for left, right, h in segments:
        if bounds and np.isclose(bounds[-1], left):
            heights[-1] = h
        else:
            bounds.append(left)
            heights.append(h)
        bounds.append(right)
        heights.append(0.0)
    # heights[i] holds between bounds[i-1] and bounds[i]
    qs = [np.sqrt(complex(k * k - v)) for v in heights]
    M = np.eye(2, dtype=complex)
    for i, xb in enumerate(bounds):
        q1, q2 = qs[i], qs[i + 1]

        def P(q):
            e, f = np.exp(1j * q * xb), np.exp(-1j * q * xb)
            return np.array([[e, f], [1j * q * e, -1j * q * f]])

        M = np.linalg.solve(P(q2), P(q1)) @ M
    r = -M[1, 0] / M[1, 1]
    t = M[0, 0] + M[0, 1] * r
    return float(abs(t) ** 2 * (qs[-1].real / qs[0].real))


def packet_transmission(segments, k0, sigma_x, n=20001):
    """|T|^2 of a Gaussian packet: |t(k)|^2 averaged over |phi(k)|^2."""
    sk = 1.0 / (2.0 * sigma_x)
    k = np.linspace(max(1e-3, k0 - 9 * sk), k0 + 9 * sk, n)
    w = norm.pdf(k, k0, sk)
    Tk = np.array([transfer_matrix_T(kk, segments) for kk in k])
    return float(np.trapezoid(w * Tk, k) / np.trapezoid(w, k))


def free_gaussian(x, t, x0, sigma, k0):
    """Exact free evolution of the normalized Gaussian under i psi_t = -psi_xx / 2."""
    a = 1.0 + 1j * t / (2 * sigma**2)
    pref = (2 * np.pi * sigma**2) ** -0.25 / np.sqrt(a)
    xi = x - x0 - k0 * t
    return pref * np.exp(-xi**2 / (4 * sigma**2 * a) + 1j * k0 * (x - x0) - 0.5j * k0**2 * t)


def free_width(t, sigma):
    return sigma * np.sqrt(1.0 + (t / (2 * sigma**2)) ** 2)


def free_bohm_path(x_start, t, x0, sigma, k0):
    """Bohmian path in a free Gaussian: scales with the width about the moving center."""
    return x0 + k0 * t + (x_start - x0) * free_width(t, sigma) / sigma


def brute_dwell(times, f_a, f_b, T2):
    """Transmission and reflection times with plain trapezoids over all samples."""
    tT = np.trapezoid(np.minimum(f_a, T2) - np.minimum(f_b, T2), times)
    tR = np.trapezoid(np.maximum(f_a, T2) - np.maximum(f_b, T2), times)
    return tT, tR


def path_dwell_dense(path_fn, t0, t1, a, b, n=200001):
    """Time a path spends in [a, b], by fine sampling."""
    t = np.linspace(t0, t1, n)
    x = path_fn(t)
    return float(np.mean((x >= a) & (x <= b)) * (t1 - t0))
