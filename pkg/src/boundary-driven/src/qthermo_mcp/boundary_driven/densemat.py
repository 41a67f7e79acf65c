"""Dense complex linear algebra on labeled tensor-product Hilbert spaces.

Operators are plain ``numpy`` complex arrays. Tensor factors are ordered with the
leftmost factor as the slowest index, and the package-wide convention is
``[copy L] ⊗ [site 1 … site N] ⊗ [copy R]``.
"""

import logging
import math
from typing import Iterable, Optional, Union

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import ContractError, StructuralError

logger = logging.getLogger(__name__)

Operator = npt.NDArray[np.complex128]

TOL_HERM = 1e-10
TOL_NULL = 1e-8


class TensorSpace(BaseModel):
    """Ordered tensor product of local Hilbert spaces."""

    model_config = ConfigDict(frozen=True)

    factor_dims: tuple[int, ...] = Field(..., min_length=1, description="Local dimensions, slowest first")
    labels: tuple[str, ...] = Field(..., description="One unique label per factor")

    @model_validator(mode="before")
    @classmethod
    def _default_labels(cls, data):
        if isinstance(data, dict) and data.get("labels") is None:
            dims = data.get("factor_dims") or ()
            data = {**data, "labels": tuple(str(i + 1) for i in range(len(dims)))}
        return data

    @model_validator(mode="after")
    def _check(self) -> "TensorSpace":
        if any(d < 1 for d in self.factor_dims):
            raise StructuralError(f"factor dimensions must be positive: {self.factor_dims}")
        if len(self.labels) != len(self.factor_dims):
            raise StructuralError("one label per factor is required")
        if len(set(self.labels)) != len(self.labels):
            raise StructuralError(f"duplicate factor labels: {self.labels}")
        return self

    @property
    def total_dim(self) -> int:
        return math.prod(self.factor_dims)

    @property
    def n_factors(self) -> int:
        return len(self.factor_dims)

    def index(self, label: Union[int, str]) -> int:
        """Position of the factor carrying ``label`` (ints are matched as labels)."""
        key = str(label)
        try:
            return self.labels.index(key)
        except ValueError:
            raise StructuralError(f"no factor labeled {key!r} in {self.labels}") from None


def as_matrix(a: npt.ArrayLike) -> Operator:
    """Coerce to a finite 2-D complex array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise StructuralError(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ContractError("matrix has non-finite entries")
    return m


def dagger(a: Operator) -> Operator:
    return a.conj().T


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


def anticommutator(a: Operator, b: Operator) -> Operator:
    return a @ b + b @ a


def hermitize(a: Operator) -> Operator:
    return 0.5 * (a + a.conj().T)


def frobenius_norm(a: Operator) -> float:
    return float(np.linalg.norm(a))


def spectral_norm(h: Operator) -> float:
    """Largest absolute eigenvalue of a Hermitian matrix."""
    if h.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(hermitize(h)))))


def kron(a: Operator, b: Operator) -> Operator:
    """Kronecker product; ``a`` is the slow index."""
    return np.kron(as_matrix(a), as_matrix(b))


def kron_all(ops: Iterable[Operator]) -> Operator:
    result = np.eye(1, dtype=np.complex128)
    for op in ops:
        result = np.kron(result, op)
    return result


def embed_local(op: Operator, space: TensorSpace, label: Union[int, str]) -> Operator:
    """Place ``op`` on one factor of ``space``, identity elsewhere."""
    idx = space.index(label)
    if op.shape != (space.factor_dims[idx],) * 2:
        raise StructuralError(
            f"local operator of shape {op.shape} does not fit factor {label!r} "
            f"of dimension {space.factor_dims[idx]}"
        )
    left = math.prod(space.factor_dims[:idx])
    right = math.prod(space.factor_dims[idx + 1 :])
    return np.kron(np.kron(np.eye(left), op), np.eye(right)).astype(np.complex128)


def partial_trace(op: Operator, space: TensorSpace, keep: Iterable[Union[int, str]]) -> Operator:
    """Trace out every factor not listed in ``keep``.

    ``keep`` holds factor positions (ints) or labels (strings). The result acts on
    the kept factors in the order they appear in ``space``.
    """
    op = as_matrix(op)
    if op.shape != (space.total_dim, space.total_dim):
        raise StructuralError(
            f"operator of shape {op.shape} does not act on a space of dimension {space.total_dim}"
        )
    kept = sorted({k if isinstance(k, int) else space.index(k) for k in keep})
    if not kept:
        raise StructuralError("keep must name at least one factor")
    if kept[0] < 0 or kept[-1] >= space.n_factors:
        raise StructuralError(f"factor index out of range: {kept}")

    dims = space.factor_dims
    n = len(dims)
    tensor = op.reshape(dims + dims)
    for i in sorted(set(range(n)) - set(kept), reverse=True):
        tensor = np.trace(tensor, axis1=i, axis2=i + n)
        n -= 1
    d_keep = math.prod(dims[k] for k in kept)
    return tensor.reshape(d_keep, d_keep)


def herm_eig(h: Operator) -> tuple[npt.NDArray[np.float64], Operator]:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.

    Raises:
        ContractError: if ``h`` is not Hermitian within ``TOL_HERM * ||h||_F``.
    """
    h = as_matrix(h)
    if h.shape[0] != h.shape[1]:
        raise StructuralError(f"herm_eig needs a square matrix, got {h.shape}")
    deviation = frobenius_norm(h - h.conj().T)
    if deviation > TOL_HERM * frobenius_norm(h):
        raise ContractError(f"matrix is not Hermitian (||H - H^dag||_F = {deviation:.3e})")
    eigenvalues, eigenvectors = np.linalg.eigh(hermitize(h))
    return eigenvalues, eigenvectors


def expm_unitary(h: Operator, t: float) -> Operator:
    """``exp(-i h t)`` for Hermitian ``h`` by phase application on the eigenbasis."""
    eigenvalues, v = herm_eig(h)
    return (v * np.exp(-1j * eigenvalues * t)) @ v.conj().T


def hermitian_function(h: Operator, fn) -> Operator:
    """Apply a scalar function to the spectrum of a Hermitian matrix."""
    eigenvalues, v = herm_eig(h)
    return (v * fn(eigenvalues)) @ v.conj().T


class NullVector(BaseModel):
    """Approximate kernel vector of a square matrix."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    vector: np.ndarray = Field(..., description="Unit column vector")
    residual: float = Field(..., description="Smallest eigenvalue of M^dag M")
    multiplicity: int = Field(..., description="Eigenvalues of M^dag M below tol_null")


def null_vector(m: Operator, tol_null: float = TOL_NULL) -> NullVector:
    """Eigenvector of ``M^dag M`` with the smallest eigenvalue.

    Computed from the SVD of ``M``: the right singular vector of the smallest
    singular value is that eigenvector and its eigenvalue is ``s_min**2``.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise StructuralError(f"null_vector needs a square matrix, got {m.shape}")
    _, s, vh = np.linalg.svd(m)
    eigenvalues = s**2
    vector = vh[-1].conj().reshape(-1, 1)
    multiplicity = int(np.count_nonzero(eigenvalues < tol_null))
    logger.debug("null_vector: dim=%d residual=%.3e multiplicity=%d", m.shape[0], eigenvalues[-1], multiplicity)
    return NullVector(vector=vector, residual=float(eigenvalues[-1]), multiplicity=multiplicity)


def vec(a: Operator) -> Operator:
    """Column-stacking vectorization."""
    return a.reshape(-1, order="F")


def unvec(v: npt.ArrayLike, dim: Optional[int] = None) -> Operator:
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    d = dim or math.isqrt(v.size)
    if d * d != v.size:
        raise StructuralError(f"vector of length {v.size} is not a vectorized {d}x{d} matrix")
    return v.reshape(d, d, order="F")


def random_hermitian(dim: int, rng: np.random.Generator) -> Operator:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (a + a.conj().T)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> Operator:
    """Full-rank (by default) random density matrix from a Ginibre matrix."""
    k = rank or dim
    g = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def is_density_matrix(rho: Operator, atol: float = 1e-8) -> bool:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if frobenius_norm(rho - rho.conj().T) > atol:
        return False
    if abs(np.trace(rho) - 1.0) > atol:
        return False
    return bool(np.linalg.eigvalsh(hermitize(rho))[0] > -atol)

