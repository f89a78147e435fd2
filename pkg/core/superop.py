"""
Quantum operator layer

All superoperators use the column-stacking convention: vec(A) stacks the
columns of A, so the map X -> A X B is the matrix kron(B.T, A) and a Kraus
term C X C^dagger is kron(C.conj(), C).
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import DefectiveGeneratorError, NotAGeneratorError, ValidationError

logger = logging.getLogger(__name__)

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)

EIGEN_CLUSTER_RTOL = 1e-8
ILL_CONDITIONED = 1e10
BIORTHO_TOL = 1e-10


def vec(a: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization"""
    return np.asarray(a).reshape(-1, order='F')


def unvec(v: np.ndarray, dim: Optional[int] = None) -> np.ndarray:
    v = np.asarray(v)
    dim = dim or int(round(np.sqrt(v.size)))
    return v.reshape((dim, dim), order='F')


# --- States and maps ---

@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite d x d matrix"""
    entries: np.ndarray
    hermitian_tol: float = 1e-12
    trace_tol: float = 1e-12
    positivity_tol: float = 1e-10

    def __post_init__(self):
        rho = np.array(self.entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValidationError(f"density matrix must be square, got shape {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > self.hermitian_tol:
            raise ValidationError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > self.trace_tol:
            raise ValidationError(f"density matrix trace is {np.trace(rho).real:.15g}, expected 1")
        lowest = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
        if lowest < -self.positivity_tol:
            raise ValidationError(f"density matrix has negative eigenvalue {lowest:.3e}")
        object.__setattr__(self, 'entries', rho)

    @classmethod
    def plus(cls) -> "DensityMatrix":
        """|+><+|, maximal coherence in the sigma_z basis"""
        return cls(0.5 * np.ones((2, 2), dtype=complex))

    @classmethod
    def pure(cls, psi: Sequence[complex]) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def state_diagnostics(rho: np.ndarray) -> Tuple[float, float, float]:
    """(|Tr rho - 1|, hermiticity defect, minimal eigenvalue)"""
    rho = np.asarray(rho)
    trace_error = float(abs(np.trace(rho) - 1.0))
    hermiticity = float(np.max(np.abs(rho - rho.conj().T)))
    lowest = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
    return trace_error, hermiticity, lowest


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    diff = np.asarray(rho) - np.asarray(sigma)
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


@dataclass(frozen=True, eq=False)
class KrausMap:
    """CPT map rho -> sum C rho C^dagger"""
    operators: Tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.array(c, dtype=complex) for c in self.operators)
        if not ops:
            raise ValidationError("Kraus map needs at least one operator")
        dim = ops[0].shape[0]
        for c in ops:
            if c.shape != (dim, dim):
                raise ValidationError(f"Kraus operators must all be {dim}x{dim}, got {c.shape}")
        total = sum(c.conj().T @ c for c in ops)
        defect = float(np.max(np.abs(total - np.eye(dim))))
        if defect > 1e-10:
            raise ValidationError(f"Kraus map is not trace preserving (defect {defect:.3e})")
        object.__setattr__(self, 'operators', ops)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho)
        return sum(c @ rho @ c.conj().T for c in self.operators)


def identity_map(dim: int = 2) -> KrausMap:
    return KrausMap((np.eye(dim, dtype=complex),))


def flip_map() -> KrausMap:
    """Jumps sigma_-, sigma_+ exchanging the populations"""
    return KrausMap((SIGMA_MINUS, SIGMA_PLUS))


def diag_map() -> KrausMap:
    """Diagonalization in the sigma_z eigenbasis"""
    return KrausMap((SIGMA_PLUS @ SIGMA_MINUS, SIGMA_MINUS @ SIGMA_PLUS))


def deph_map() -> KrausMap:
    """Phase flip by sigma_z"""
    return KrausMap((SIGMA_Z,))


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """Linear map on d x d matrices as a d^2 x d^2 column-stacking matrix"""
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        dim = int(round(np.sqrt(m.shape[0])))
        if m.ndim != 2 or m.shape != (dim * dim, dim * dim):
            raise ValidationError(f"superoperator matrix must be d^2 x d^2, got shape {m.shape}")
        object.__setattr__(self, 'matrix', m)

    @classmethod
    def identity(cls, dim: int = 2) -> "SuperOperator":
        return cls(np.eye(dim * dim, dtype=complex))

    @classmethod
    def zero(cls, dim: int = 2) -> "SuperOperator":
        return cls(np.zeros((dim * dim, dim * dim), dtype=complex))

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return apply(self, rho)

    def __matmul__(self, other: "SuperOperator") -> "SuperOperator":
        return SuperOperator(self.matrix @ other.matrix)

    def __add__(self, other: "SuperOperator") -> "SuperOperator":
        return SuperOperator(self.matrix + other.matrix)

    def __sub__(self, other: "SuperOperator") -> "SuperOperator":
        return SuperOperator(self.matrix - other.matrix)

    def __mul__(self, factor: complex) -> "SuperOperator":
        return SuperOperator(self.matrix * factor)

    __rmul__ = __mul__

    def inverse(self) -> "SuperOperator":
        return SuperOperator(np.linalg.inv(self.matrix))

    def distance(self, other: "SuperOperator") -> float:
        return float(np.linalg.norm(self.matrix - other.matrix))


def liouville(k: KrausMap) -> SuperOperator:
    """sum kron(conj(C), C) over the Kraus operators"""
    return SuperOperator(sum(np.kron(c.conj(), c) for c in k.operators))


def apply(s: SuperOperator, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return unvec(s.matrix @ vec(rho), rho.shape[0])


def sandwich(left: np.ndarray, right: np.ndarray) -> SuperOperator:
    """X -> left X right"""
    return SuperOperator(np.kron(np.asarray(right).T, np.asarray(left)))


def dissipator(op: np.ndarray) -> SuperOperator:
    """X -> L X L^dagger - {L^dagger L, X}/2"""
    op = np.asarray(op, dtype=complex)
    dim = op.shape[0]
    eye = np.eye(dim)
    lead = op.conj().T @ op
    return SuperOperator(np.kron(op.conj(), op) - 0.5 * (np.kron(eye, lead) + np.kron(lead.T, eye)))


def hamiltonian_part(h: np.ndarray) -> SuperOperator:
    """X -> -i [H, X]"""
    h = np.asarray(h, dtype=complex)
    eye = np.eye(h.shape[0])
    return SuperOperator(-1j * (np.kron(eye, h) - np.kron(h.T, eye)))


def commutator_norm(a: SuperOperator, b: SuperOperator) -> float:
    return float(np.linalg.norm(a.matrix @ b.matrix - b.matrix @ a.matrix))


# --- Complete positivity ---

def choi(s: SuperOperator) -> np.ndarray:
    """Choi matrix by reshuffling the column-stacking superoperator"""
    dim = s.dim
    return np.reshape(s.matrix, [dim] * 4).swapaxes(0, 3).reshape([dim ** 2, dim ** 2])


def is_cp(s: SuperOperator, tol: float = 1e-9) -> Tuple[bool, float]:
    """Complete positivity and the minimal Choi eigenvalue"""
    c = choi(s)
    lowest = float(np.min(np.linalg.eigvalsh(0.5 * (c + c.conj().T))))
    return lowest >= -tol, lowest


def is_tp(s: SuperOperator, tol: float = 1e-9) -> bool:
    """Partial trace of the Choi matrix over the output equals the identity"""
    dim = s.dim
    reduced = np.einsum('ijkj->ik', choi(s).reshape([dim] * 4))
    return bool(np.max(np.abs(reduced - np.eye(dim))) <= tol)


# --- Damping basis ---

@dataclass(frozen=True, eq=False)
class DampingBasis:
    """Bi-orthonormal right/left eigen-operators of a diagonalizable superoperator

    Columns of right_matrix are vec(tau_alpha), columns of left_matrix are
    vec(varsigma_alpha), with left_matrix^dagger right_matrix = identity.
    """
    right_matrix: np.ndarray
    left_matrix: np.ndarray
    eigenvalues: np.ndarray
    channel_labels: Tuple[int, ...] = ()

    def __post_init__(self):
        if not self.channel_labels:
            object.__setattr__(self, 'channel_labels', tuple(range(len(self.eigenvalues))))

    @classmethod
    def from_right_operators(cls, right_ops: Sequence[np.ndarray],
                             eigenvalues: Sequence[complex]) -> "DampingBasis":
        right = np.column_stack([vec(t) for t in right_ops])
        left = np.linalg.inv(right).conj().T
        return cls(right, left, np.asarray(eigenvalues, dtype=complex))

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.right_matrix.shape[0])))

    @property
    def right_ops(self) -> List[np.ndarray]:
        return [unvec(self.right_matrix[:, a], self.dim) for a in range(self.right_matrix.shape[1])]

    @property
    def left_ops(self) -> List[np.ndarray]:
        return [unvec(self.left_matrix[:, a], self.dim) for a in range(self.left_matrix.shape[1])]

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def projectors(self) -> np.ndarray:
        """Stack of M_alpha = |tau_alpha><varsigma_alpha|, shape (n, d^2, d^2)"""
        return np.einsum('ia,ja->aij', self.right_matrix, self.left_matrix.conj())

    def reconstruct(self, values: Sequence[complex]) -> SuperOperator:
        """sum values_alpha M_alpha"""
        values = np.asarray(values, dtype=complex)
        return SuperOperator((self.right_matrix * values) @ self.left_matrix.conj().T)

    def coefficients(self, rho: np.ndarray) -> np.ndarray:
        """Tr(varsigma_alpha^dagger rho) for every channel"""
        return self.left_matrix.conj().T @ vec(rho)

    def biorthogonality_defect(self) -> float:
        gram = self.left_matrix.conj().T @ self.right_matrix
        return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))

    def stationary_channels(self, tol: float = 1e-10) -> List[int]:
        scale = max(1.0, float(np.max(np.abs(self.eigenvalues))))
        return [a for a, lam in enumerate(self.eigenvalues) if abs(lam) <= tol * scale]


def _cluster_eigenvalues(values: np.ndarray, tol: float) -> List[List[int]]:
    groups: List[List[int]] = []
    for i, lam in enumerate(values):
        for group in groups:
            if abs(values[group[0]] - lam) <= tol:
                group.append(i)
                break
        else:
            groups.append([i])
    return groups


def _canonical_span(vectors: np.ndarray, rank_tol: float = 1e-6) -> np.ndarray:
    """Orthonormal basis of span(vectors), Gram-Schmidt on coordinate projections"""
    u, sv, _ = np.linalg.svd(vectors, full_matrices=False)
    rank = int(np.sum(sv > rank_tol * sv[0]))
    if rank < vectors.shape[1]:
        raise DefectiveGeneratorError(
            f"eigenspace of dimension {vectors.shape[1]} spanned by only {rank} independent vectors")
    q = u[:, :rank]
    chosen: List[np.ndarray] = []
    for i in range(q.shape[0]):
        v = q @ q[i].conj()
        for w in chosen:
            v = v - (w.conj() @ v) * w
        norm = np.linalg.norm(v)
        if norm > rank_tol:
            chosen.append(v / norm)
        if len(chosen) == rank:
            break
    return np.column_stack(chosen)


def _snap_eigenvalue(lam: complex, scale: float) -> complex:
    lam = complex(lam)
    if abs(lam.imag) <= 1e-12 * scale:
        lam = complex(lam.real, 0.0)
    if abs(lam) <= 1e-12 * scale:
        lam = 0j
    return lam


def damping_basis(s: SuperOperator) -> DampingBasis:
    """Bi-orthonormal eigen-decomposition with deterministic channel order

    Channels are sorted by eigenvalue (real part descending, then imaginary
    part); inside a degenerate eigenspace the right operators come from
    Gram-Schmidt on the projected coordinate vectors.

    Raises:
        DefectiveGeneratorError: a degenerate eigenspace lacks eigenvectors
    """
    values, vectors = scipy.linalg.eig(s.matrix)
    scale = max(1.0, float(np.max(np.abs(values))))
    groups = _cluster_eigenvalues(values, EIGEN_CLUSTER_RTOL * scale)
    centers = [_snap_eigenvalue(np.mean(values[g]), scale) for g in groups]
    order = sorted(range(len(groups)), key=lambda i: (-round(centers[i].real, 10),
                                                      round(centers[i].imag, 10)))
    columns = [_canonical_span(vectors[:, groups[i]]) for i in order]
    right = np.column_stack(columns)
    condition = np.linalg.cond(right)
    if condition > ILL_CONDITIONED:
        logger.warning("damping basis is ill-conditioned (cond %.3e)", condition)
    left = np.linalg.inv(right).conj().T
    projected = np.einsum('ia,ij,ja->a', left.conj(), s.matrix, right)
    eigenvalues = np.array([_snap_eigenvalue(v, scale) for v in projected])
    basis = DampingBasis(right, left, eigenvalues)
    defect = basis.biorthogonality_defect()
    if defect > BIORTHO_TOL:
        logger.warning("damping basis bi-orthogonality defect %.3e", defect)
    return basis


# --- Lindblad form ---

def operator_basis(dim: int) -> List[np.ndarray]:
    """Orthonormal operator basis: identity/sqrt(d) first, then traceless elements"""
    if dim == 2:
        return [IDENTITY / np.sqrt(2)] + [p / np.sqrt(2) for p in (SIGMA_X, SIGMA_Y, SIGMA_Z)]
    basis = [np.eye(dim, dtype=complex) / np.sqrt(dim)]
    for j in range(dim):
        for k in range(j + 1, dim):
            sym = np.zeros((dim, dim), dtype=complex)
            sym[j, k] = sym[k, j] = 1 / np.sqrt(2)
            anti = np.zeros((dim, dim), dtype=complex)
            anti[j, k], anti[k, j] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            basis.extend([sym, anti])
    for l in range(1, dim):
        diag = np.zeros(dim, dtype=complex)
        diag[:l] = 1.0
        diag[l] = -l
        basis.append(np.diag(diag) / np.sqrt(l * (l + 1)))
    return basis


@dataclass(frozen=True, eq=False)
class LindbladForm:
    """Hamiltonian plus rates and orthonormal traceless jump operators"""
    hamiltonian: np.ndarray
    rates: np.ndarray
    operators: Tuple[np.ndarray, ...]
    kossakowski: np.ndarray = field(repr=False, default=None)

    @property
    def channels(self) -> List[Tuple[float, np.ndarray]]:
        return list(zip(self.rates, self.operators))

    def to_superoperator(self) -> SuperOperator:
        total = hamiltonian_part(self.hamiltonian)
        for rate, op in zip(self.rates, self.operators):
            total = total + dissipator(op) * rate
        return total

    def rate_along(self, op: np.ndarray) -> float:
        """Rate of the term gamma X rho X^dagger for X in its own normalization

        Invariant under rotations inside degenerate rate eigenspaces.
        """
        op = np.asarray(op, dtype=complex)
        basis = operator_basis(op.shape[0])[1:]
        coeffs = np.array([np.vdot(f, op) for f in basis])
        norm2 = float(np.real(np.vdot(op, op)))
        weight = float(np.real(coeffs.conj() @ self.kossakowski @ coeffs))
        return weight / norm2 ** 2


def lindblad_form(s: SuperOperator, tol: float = 1e-9) -> LindbladForm:
    """GKS decomposition of a generator

    Raises:
        NotAGeneratorError: not trace-annihilating or not hermiticity preserving
    """
    dim = s.dim
    scale = max(1.0, float(np.linalg.norm(s.matrix)))
    trace_row = vec(np.eye(dim)).conj() @ s.matrix
    if np.max(np.abs(trace_row)) > tol * scale:
        raise NotAGeneratorError("superoperator is not trace-annihilating")
    basis = operator_basis(dim)
    # a_kl with L(X) = sum a_kl F_k X F_l^dagger
    elements = np.array([[np.kron(fl.conj(), fk) for fl in basis] for fk in basis])
    a = np.einsum('klij,ij->kl', elements.conj(), s.matrix)
    if np.max(np.abs(a - a.conj().T)) > tol * scale:
        raise NotAGeneratorError("superoperator does not preserve hermiticity")
    a = 0.5 * (a + a.conj().T)
    kossakowski = a[1:, 1:]
    g = a[0, 0] / (2 * dim) * np.eye(dim) + sum(a[i, 0] * basis[i] for i in range(1, len(basis))) / np.sqrt(dim)
    hamiltonian = 0.5j * (g - g.conj().T)
    rates, vectors = np.linalg.eigh(kossakowski)
    order = np.argsort(-rates, kind='stable')
    rates = rates[order]
    vectors = vectors[:, order]
    operators = tuple(sum(vectors[i, a_] * basis[i + 1] for i in range(len(basis) - 1))
                      for a_ in range(vectors.shape[1]))
    return LindbladForm(hamiltonian=hamiltonian, rates=rates, operators=operators,
                        kossakowski=kossakowski)
