"""
Symmetric eigendecomposition and PSD matrix square root.

Both routines back the Fréchet distance; they reject asymmetric input
instead of silently symmetrizing it.
"""

import numpy as np

from ..errors import ConvergenceError, NumericalError, ShapeError

SYMMETRY_TOLERANCE = 1e-9
NEGATIVE_EIGEN_TOLERANCE = 1e-10


def _check_symmetric(matrix: np.ndarray) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    scale = max(float(np.max(np.abs(m))), 1.0) if m.size else 1.0
    asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if asym > SYMMETRY_TOLERANCE * scale:
        raise ShapeError(
            f"matrix is not symmetric: max |A - A^T| = {asym:.3e} "
            f"exceeds {SYMMETRY_TOLERANCE:g} relative tolerance"
        )
    return m


def sym_eig(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a real symmetric matrix.

    Args:
        matrix: Square symmetric matrix (relative tolerance 1e-9)

    Returns:
        tuple: (eigenvalues ascending, eigenvectors as columns, orthonormal)

    Raises:
        ShapeError: If the matrix is not square or not symmetric
        ConvergenceError: If the LAPACK driver fails to converge
    """
    m = _check_symmetric(matrix)
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(m)
    except np.linalg.LinAlgError as e:
        raise ConvergenceError(
            f"symmetric eigensolver did not converge within its iteration cap: {e}",
            term="sym_eig",
        ) from e
    return eigenvalues, eigenvectors


def psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    """
    Principal square root of a symmetric positive semi-definite matrix.

    Small negative eigenvalues (>= -1e-10 * max|λ|) from round-off are
    clamped to zero, as are eigenvalues under the numerical rank cutoff
    n * eps * max|λ|, so null directions contribute no round-off roots.

    Raises:
        ShapeError: If the matrix is not square symmetric
        NumericalError: If the input is genuinely indefinite
    """
    eigenvalues, eigenvectors = sym_eig(matrix)
    if eigenvalues.size == 0:
        return np.zeros_like(eigenvectors)
    largest = float(np.max(np.abs(eigenvalues)))
    most_negative = float(eigenvalues[0])
    if most_negative < -NEGATIVE_EIGEN_TOLERANCE * largest:
        raise NumericalError(
            f"matrix is indefinite: most negative eigenvalue {most_negative:.6e}",
            term="psd_sqrt",
        )
    cutoff = eigenvalues.size * np.finfo(np.float64).eps * largest
    roots = np.sqrt(np.where(eigenvalues > cutoff, eigenvalues, 0.0))
    root = (eigenvectors * roots) @ eigenvectors.T
    return (root + root.T) / 2.0
