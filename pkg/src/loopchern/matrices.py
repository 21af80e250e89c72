"""Dense complex matrix kernels: matrix exponential, path-ordered exponential,
block sums, and the JSON wire encoding for matrices.

All values are numpy complex128 arrays of shape (n, n).  Matrices are small
(n up to a few hundred); everything here is plain dense arithmetic.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "as_matrix",
    "expm",
    "path_ordered_exp",
    "block_diag",
    "identity_like",
    "is_unitary",
    "is_anti_hermitian",
    "anti_hermitian_defect",
    "unitarity_defect",
    "random_anti_hermitian",
    "random_unitary",
    "cmat_to_json",
    "cmat_from_json",
    "sample_matrix_path",
]


def as_matrix(x) -> np.ndarray:
    """Coerce to a finite square complex matrix; scalars become 1x1."""
    a = np.asarray(x, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError("matrix has non-finite entries")
    return a


def identity_like(a: np.ndarray) -> np.ndarray:
    return np.eye(a.shape[-1], dtype=complex)


# Pade-13 numerator coefficients (denominator uses the alternating signs).
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
    33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)

# Squaring threshold: scale until the 1-norm is at or below this.
_EXPM_THRESHOLD = 0.5


def expm(x) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a Pade approximant.

    The argument is scaled by 2**-s until its 1-norm is <= 0.5, a [13/13]
    Pade approximant is evaluated, and the result is squared s times.
    """
    a = as_matrix(x)
    norm = np.linalg.norm(a, 1)
    squarings = 0
    if norm > _EXPM_THRESHOLD:
        squarings = int(math.ceil(math.log2(norm / _EXPM_THRESHOLD)))
        a = a / (2.0 ** squarings)

    eye = identity_like(a)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    b = _PADE13
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye)
    f = np.linalg.solve(v - u, v + u)
    for _ in range(squarings):
        f = f @ f
    return f


def block_diag(a, b) -> np.ndarray:
    """Block-diagonal sum of two square matrices."""
    a = as_matrix(a)
    b = as_matrix(b)
    n, m = a.shape[0], b.shape[0]
    out = np.zeros((n + m, n + m), dtype=complex)
    out[:n, :n] = a
    out[n:, n:] = b
    return out


def sample_matrix_path(x, ts: np.ndarray) -> np.ndarray:
    """Sample a matrix-valued path t -> (n, n) on the given nodes.

    Accepts a plain callable or any object with a batched ``values`` method.
    Scalar-valued callables are lifted to 1x1 matrices.
    """
    if hasattr(x, "values"):
        return np.asarray(x.values(ts), dtype=complex)
    first = as_matrix(x(float(ts[0])))
    out = np.empty((len(ts),) + first.shape, dtype=complex)
    out[0] = first
    for i, t in enumerate(ts[1:], start=1):
        out[i] = as_matrix(x(float(t)))
    return out


def path_ordered_exp(x, quad) -> np.ndarray:
    """Holonomy of a matrix path: solve h'(t) = h(t) X(t), h(0) = I, on [0, 1].

    Classic one-step RK4 on the grid, sampling X at step midpoints; equal to
    the time-ordered series sum_m int_{t1<...<tm} X(t1)...X(tm) dt.

    ``quad`` is a QuadratureSpec or a plain step count (>= 2).
    """
    steps = int(getattr(quad, "grid_t", quad))
    if steps < 2:
        raise ValueError(f"path_ordered_exp needs a grid of at least 2 steps, got {steps}")
    ts = np.linspace(0.0, 1.0, 2 * steps + 1)
    vals = sample_matrix_path(x, ts)
    h = 1.0 / steps
    hol = identity_like(vals[0])
    for j in range(steps):
        x0, xm, x1 = vals[2 * j], vals[2 * j + 1], vals[2 * j + 2]
        k1 = hol @ x0
        k2 = (hol + 0.5 * h * k1) @ xm
        k3 = (hol + 0.5 * h * k2) @ xm
        k4 = (hol + h * k3) @ x1
        hol = hol + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return hol


def unitarity_defect(u) -> float:
    u = as_matrix(u)
    return float(np.linalg.norm(u.conj().T @ u - identity_like(u)))


def is_unitary(u, tol: float = 1e-9) -> bool:
    return unitarity_defect(u) <= tol


def anti_hermitian_defect(x) -> float:
    x = as_matrix(x)
    return float(np.max(np.abs(x + x.conj().T)))


def is_anti_hermitian(x, tol: float = 1e-12) -> bool:
    return anti_hermitian_defect(x) <= tol


def random_anti_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Random element of u(n), entries O(scale)."""
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    x = 0.5 * (z - z.conj().T)
    return scale * x / max(np.linalg.norm(x, 2), 1e-30)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def cmat_to_json(m) -> dict:
    """Encode a matrix as {"n": int, "re": [[...]], "im": [[...]]}."""
    m = as_matrix(m)
    return {"n": int(m.shape[0]), "re": m.real.tolist(), "im": m.imag.tolist()}


def cmat_from_json(obj: dict) -> np.ndarray:
    try:
        n = int(obj["n"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed matrix JSON: {exc}") from exc
    if re.shape != (n, n) or im.shape != (n, n):
        raise ValueError(f"matrix JSON shape mismatch: n={n}, re {re.shape}, im {im.shape}")
    m = re + 1j * im
    if not np.all(np.isfinite(m.view(float))):
        raise ValueError("matrix JSON has non-finite entries")
    return m
