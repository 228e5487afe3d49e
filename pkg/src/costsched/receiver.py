"""Zero-forcing detection, achievable rates and capacity expressions."""

from __future__ import annotations

import math

import numpy as np
from scipy import linalg


class SingularChannelError(np.linalg.LinAlgError):
    """The selected-user channel is too ill-conditioned for zero forcing."""


def column_condition(h: np.ndarray) -> float:
    """Condition number of ``h`` after scaling every column to unit norm."""
    norms = np.linalg.norm(h, axis=0)
    if np.any(norms == 0):
        return math.inf
    return float(np.linalg.cond(h / norms))


def zf_weights(h: np.ndarray, cond_cap: float = 1e6) -> np.ndarray:
    """Pseudo-inverse ``(H^H H)^-1 H^H`` of a tall full-column-rank channel.

    Computed through a QR factorization so the residual ``W H - I`` stays at
    the level of ``cond(H) * eps``.
    """
    h = np.asarray(h, dtype=complex)
    m, k = h.shape
    if k > m:
        raise SingularChannelError(f"cannot zero-force {k} users with {m} antennas")
    if k == 0:
        return np.zeros((0, m), dtype=complex)
    if column_condition(h) > cond_cap:
        raise SingularChannelError("channel condition number exceeds the cap")
    q, r = linalg.qr(h, mode="economic")
    return linalg.solve_triangular(r, q.conj().T)


def sinr(h: np.ndarray, w: np.ndarray, p: float, noise: float, literal: bool = False) -> np.ndarray:
    """Per-stream SINR after the linear filter ``w`` with equal user power ``p``.

    The noise term is the filtered noise ``noise * ||w_k||^2``; ``literal``
    replaces it with a bare 1 as in the textbook rate expression.
    """
    g = np.abs(w @ h) ** 2                     # g[k, i] = |w_k h_i|^2
    signal = p * np.diag(g)
    interference = p * (g.sum(axis=1) - np.diag(g))
    noise_term = np.ones(len(w)) if literal else noise * np.sum(np.abs(w) ** 2, axis=1)
    return signal / (noise_term + interference)


def sum_rate(h: np.ndarray, w: np.ndarray, p_total: float, noise: float,
             literal: bool = False) -> float:
    """Sum of ``log2(1 + SINR_k)`` with the total power split equally over the columns of ``h``."""
    k = h.shape[1]
    if k == 0:
        return 0.0
    return float(np.sum(np.log2(1 + sinr(h, w, p_total / k, noise, literal))))


def zf_sum_rate(h: np.ndarray, p_total: float, noise: float, cond_cap: float = 1e6,
                literal: bool = False) -> float:
    return sum_rate(h, zf_weights(h, cond_cap), p_total, noise, literal)


def zf_closed_form_rate(h: np.ndarray, p: float, noise: float) -> float:
    """Interference-free ZF rate ``sum log2(1 + p / (noise [(H^H H)^-1]_kk))``."""
    gram_inv = np.linalg.inv(h.conj().T @ h)
    return float(np.sum(np.log2(1 + p / (noise * np.real(np.diag(gram_inv))))))


def _logdet2(a: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet(a)
    if np.real(sign) <= 0:
        raise ValueError("determinant is not positive")
    return float(logdet / math.log(2))


def ergodic_capacity(channels, p: float) -> float:
    """Mean of ``log2 det(I + p H^H H)`` over an ensemble of channel matrices.

    ``channels`` is an array of shape (T, M, K) or an iterable of M x K matrices.
    """
    vals = []
    for h in channels:
        h = np.asarray(h)
        vals.append(_logdet2(np.eye(h.shape[1]) + p * (h.conj().T @ h)))
    return float(np.mean(vals))


def check_correlation(r: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    r = np.asarray(r, dtype=complex)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError("correlation matrix must be square")
    if not np.allclose(r, r.conj().T, atol=tol):
        raise ValueError("correlation matrix must be Hermitian")
    if not np.allclose(np.diag(r), 1.0, atol=1e-6):
        raise ValueError("correlation matrix must have a unit diagonal")
    if np.linalg.eigvalsh((r + r.conj().T) / 2).min() < -tol * max(1, len(r)):
        raise ValueError("correlation matrix is not positive semidefinite")
    return r


def capacity_upper_bound(r: np.ndarray, p: float) -> float:
    """Large-array capacity approximation ``log2 det(I + p R)``."""
    r = check_correlation(r)
    return _logdet2(np.eye(len(r)) + p * r)


def sample_correlation(channels) -> np.ndarray:
    """Column correlation ``E{h_m^H h_n}`` normalized to a unit diagonal.

    ``channels`` has shape (T, M, K) with T >= 2 fading realizations.
    """
    hs = np.asarray(channels)
    if hs.ndim != 3 or hs.shape[0] < 2:
        raise ValueError("need an ensemble of shape (T, M, K) with T >= 2")
    gram = np.einsum("tmi,tmj->ij", hs.conj(), hs) / hs.shape[0]
    energy = np.sqrt(np.real(np.diag(gram)))
    denom = np.outer(energy, energy)
    r = np.divide(gram, denom, out=np.zeros_like(gram), where=denom > 0)
    r = (r + r.conj().T) / 2
    np.fill_diagonal(r, np.where(energy > 0, 1.0, 0.0))
    return r


def three_user_correlation(zeta, beta) -> np.ndarray:
    """R with off-diagonals ``zeta_mn exp(j beta_mn)`` for the pairs (12, 13, 23)."""
    z12, z13, z23 = zeta
    b12, b13, b23 = beta
    r12, r13, r23 = (z12 * np.exp(1j * b12), z13 * np.exp(1j * b13), z23 * np.exp(1j * b23))
    return np.array([[1, r12, r13],
                     [np.conj(r12), 1, r23],
                     [np.conj(r13), np.conj(r23), 1]], dtype=complex)


def three_user_capacity(zeta, beta, p: float, form: str = "determinant") -> float:
    """Closed-form ``log2 det(I + p R)`` for three users.

    The expansion is ``(1+p)^3 - p^2 (1+p) sum(zeta^2)
    + 2 p^3 z12 z13 z23 cos(b12 + b23 - b13)``.  ``form="printed"`` swaps the
    cosine for ``sin(b12 - b13 + b23)``, which is only kept for comparison.
    """
    z12, z13, z23 = (float(z) for z in zeta)
    b12, b13, b23 = (float(b) for b in beta)
    if not all(0 <= z <= 1 for z in (z12, z13, z23)):
        raise ValueError("zeta values must lie in [0, 1]")
    if form == "determinant":
        triple = math.cos(b12 + b23 - b13)
    elif form == "printed":
        triple = math.sin(b12 - b13 + b23)
    else:
        raise ValueError(f"unknown form {form!r}")
    s = z12 ** 2 + z13 ** 2 + z23 ** 2
    det = (1 + p) ** 3 - p ** 2 * (1 + p) * s + 2 * p ** 3 * z12 * z13 * z23 * triple
    if det <= 0:
        raise ValueError("(zeta, beta) does not describe a positive semidefinite correlation")
    return math.log2(det)
