"""Shared generators and independent oracles for the test suite."""

import itertools

import numpy as np
from numpy.polynomial import polynomial as npp

from nyqscale.lti import TransferFunction
from nyqscale.network import PowerNetwork


def random_connected_laplacian(rng, n: int) -> np.ndarray:
    """Random weighted connected graph Laplacian."""
    while True:
        W = np.triu((rng.random((n, n)) < 0.7) * rng.uniform(0.2, 2.0, (n, n)), 1)
        W = W + W.T
        L = np.diag(W.sum(axis=1)) - W
        if n == 1 or np.sort(np.linalg.eigvalsh(L))[1] > 1e-6:
            return L


def random_stable_proper_tf(rng, max_order: int = 3, strictly_proper: bool = True):
    """Random stable rational transfer function with poles in
    Re in [-6, -0.2]; gain sign random so closed loops can go either way."""
    order = int(rng.integers(1, max_order + 1))
    poles = []
    while len(poles) < order:
        if order - len(poles) >= 2 and rng.random() < 0.5:
            re = -rng.uniform(0.2, 6.0)
            im = rng.uniform(0.2, 5.0)
            poles += [complex(re, im), complex(re, -im)]
        else:
            poles.append(complex(-rng.uniform(0.2, 6.0), 0.0))
    den = npp.polyfromroots(poles).real
    n_zeros = int(rng.integers(0, order if strictly_proper else order + 1))
    zeros = []
    while len(zeros) < n_zeros:
        if n_zeros - len(zeros) >= 2 and rng.random() < 0.4:
            re = rng.uniform(-5.0, -0.2)
            im = rng.uniform(0.2, 4.0)
            zeros += [complex(re, im), complex(re, -im)]
        else:
            zeros.append(complex(rng.uniform(-6.0, -0.2), 0.0))
    num = npp.polyfromroots(zeros).real if zeros else np.array([1.0])
    gain = rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 3.0)
    return TransferFunction.from_coeffs(gain * num, den)


def closed_loop_charpoly(L: np.ndarray, tfs) -> np.ndarray:
    """Characteristic polynomial of the interconnection delta = G(d - L delta)
    by direct determinant expansion of (Q + P L), Q = diag(den_i),
    P = diag(num_i). Permutation-sum oracle, exact for small n."""
    n = L.shape[0]
    entries = {}
    for i in range(n):
        for j in range(n):
            if i == j:
                e = npp.polyadd(tfs[i].den.as_array(), tfs[i].num.as_array() * L[i, j])
            else:
                e = tfs[i].num.as_array() * L[i, j]
            entries[i, j] = np.atleast_1d(e)
    det = np.array([0.0])
    for perm in itertools.permutations(range(n)):
        sign = _perm_sign(perm)
        term = np.array([1.0])
        for i in range(n):
            term = npp.polymul(term, entries[i, perm[i]])
        det = npp.polyadd(det, sign * term)
    return np.trim_zeros(det, "b")


def _perm_sign(perm) -> float:
    perm = list(perm)
    sign = 1.0
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def ray_crossing_winding(curve, point) -> int:
    """Independent winding oracle: signed count of crossings of the
    rightward horizontal ray from ``point`` (anticlockwise positive).
    The curve must not start on the ray."""
    z = np.asarray(curve, dtype=complex)
    x = z.real - np.real(point)
    y = z.imag - np.imag(point)
    crossings = 0
    for k in range(len(z) - 1):
        ya, yb = y[k], y[k + 1]
        if (ya > 0) != (yb > 0):
            t = ya / (ya - yb)
            xc = x[k] + t * (x[k + 1] - x[k])
            if xc > 0:
                crossings += 1 if yb > ya else -1
    return crossings


def network_from_laplacian(L) -> PowerNetwork:
    return PowerNetwork.from_laplacian(np.asarray(L, dtype=float))
