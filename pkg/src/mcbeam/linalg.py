"""Small complex linear-algebra helpers for Hermitian PSD matrices.

Conventions: ``h`` and ``w`` are 1-D complex arrays of length T. The
received amplitude of beam ``w`` at a user with channel ``h`` is
``h^H w`` (``np.vdot(h, w)``), so ``outer(h)`` is ``h h^H`` and
``quad_form(w, outer(h)) == |h^H w|**2``.
"""

import numpy as np

PSD_EPS = 1e-9
RANK_TOL = 1e-10


def hermitize(a):
    """Return ``(a + a^H) / 2``; the result is exactly Hermitian.

    Works on stacks of matrices (last two axes).
    """
    a = np.asarray(a)
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def outer(h):
    """Hermitian outer product ``h h^H`` (entry ``(i, j) = h_i conj(h_j)``)."""
    h = np.asarray(h, dtype=complex)
    return hermitize(h[..., :, None] * np.conj(h[..., None, :]))


def weighted_outer_sum(weights, vecs):
    """``sum_i weights[i] * vecs[i] vecs[i]^H`` for real non-negative weights.

    ``vecs`` has shape ``(..., K, T)`` and ``weights`` shape ``(..., K)``.
    """
    vecs = np.asarray(vecs, dtype=complex)
    weights = np.asarray(weights, dtype=float)
    a = np.einsum("...k,...ki,...kj->...ij", weights, vecs, np.conj(vecs))
    return hermitize(a)


def quad_form(w, a):
    """Real part of ``w^H A w``."""
    w = np.asarray(w, dtype=complex)
    a = np.asarray(a, dtype=complex)
    if a.shape[-2:] != (w.shape[-1], w.shape[-1]):
        raise ValueError(f"dimension mismatch: w {w.shape} vs A {a.shape}")
    return np.real(np.einsum("...i,...ij,...j->...", np.conj(w), a, w))


def is_hermitian(a, atol=0.0):
    a = np.asarray(a)
    return bool(np.max(np.abs(a - np.conj(np.swapaxes(a, -1, -2))), initial=0.0) <= atol)


def psd_pseudo_inverse(a, rank_tol=RANK_TOL):
    """Moore-Penrose inverse of a Hermitian PSD matrix via ``eigh``.

    Eigenvalues above ``rank_tol * lambda_max`` are inverted, the rest
    are treated as zero.
    """
    a = np.asarray(a, dtype=complex)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has NaN/Inf entries")
    scale = max(np.max(np.abs(a), initial=0.0), 1.0)
    if not is_hermitian(a, atol=1e-12 * scale):
        raise ValueError("matrix is not Hermitian")
    evals, evecs = np.linalg.eigh(hermitize(a))
    if evals.size and evals[0] < -PSD_EPS * scale:
        raise ValueError(f"matrix is not PSD (min eigenvalue {evals[0]:.3e})")
    lam_max = evals[-1] if evals.size else 0.0
    if lam_max <= 0.0:
        return np.zeros_like(a)
    keep = evals > rank_tol * lam_max
    inv = np.zeros_like(evals)
    inv[keep] = 1.0 / evals[keep]
    return hermitize((evecs * inv) @ np.conj(evecs.T))
