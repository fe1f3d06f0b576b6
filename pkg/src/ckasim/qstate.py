"""Dense linear algebra for multi-qubit density operators.

Qubit ordering convention, used everywhere in this package: subsystem 0
(Alice) is the most significant bit of a computational basis label, so
``numpy.kron(a, b)`` puts ``a`` on the lower-indexed qubits.  All operations
are pure functions on immutable objects and are safe to call concurrently.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field
from math import log2

import numpy as np

from .errors import CapacityError, ConvergenceError, ValidationError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
NORM_TOL = 1e-12

#: Qubit budget for operations on structured objects (state vectors,
#: diagonal-exploiting paths); dense matrices use the tighter cap below.
STRUCTURED_QUBIT_CAP = 13

_DEFAULT_DENSE_CAP = 7


def dense_qubit_cap() -> int:
    """Dense-matrix qubit budget; override with env var CKASIM_DENSE_CAP."""
    raw = os.environ.get("CKASIM_DENSE_CAP")
    if raw is None:
        return _DEFAULT_DENSE_CAP
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ValidationError(f"CKASIM_DENSE_CAP must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise ValidationError(f"CKASIM_DENSE_CAP must be >= 1, got {cap}")
    return cap


def _check_dense_capacity(qubit_count: int) -> None:
    cap = dense_qubit_cap()
    if qubit_count > cap:
        raise CapacityError(
            f"dense operation on {qubit_count} qubits exceeds the cap of {cap}"
            " (set CKASIM_DENSE_CAP to raise it)"
        )


def _check_structured_capacity(qubit_count: int) -> None:
    if qubit_count > STRUCTURED_QUBIT_CAP:
        raise CapacityError(
            f"structured operation on {qubit_count} qubits exceeds the cap of"
            f" {STRUCTURED_QUBIT_CAP}"
        )


def _qubit_count_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim <= 0 or 2**n != dim:
        raise ValidationError(f"dimension must be a power of 2, got {dim}")
    return n


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=complex)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class DensityMatrix:
    """A density operator on a register of qubits.

    ``classical[i]`` marks subsystem i as pinched (diagonal in the
    computational basis), e.g. after :func:`measure_computational`.
    """

    matrix: np.ndarray
    classical: tuple[bool, ...] = ()

    def __post_init__(self):
        m = _readonly(self.matrix)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"density matrix must be square, got shape {m.shape}")
        n = _qubit_count_of(m.shape[0])
        if not self.classical:
            object.__setattr__(self, "classical", (False,) * n)
        elif len(self.classical) != n:
            raise ValidationError(
                f"classical flags length {len(self.classical)} != qubit count {n}"
            )
        herm = np.abs(m - m.conj().T).max()
        if herm > HERMITIAN_TOL:
            raise ValidationError(f"not Hermitian: max |M - M^dag| = {herm:.3e}")
        tr = m.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValidationError(f"trace {tr} deviates from 1 beyond {TRACE_TOL}")
        lo = float(np.linalg.eigvalsh(m)[0])
        if lo < -PSD_TOL:
            raise ValidationError(f"not positive semidefinite: min eigenvalue {lo:.3e}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def qubit_count(self) -> int:
        return self.dim.bit_length() - 1

    def to_debug_json(self) -> str:
        return json.dumps(
            {
                "dim": self.dim,
                "re": self.matrix.real.tolist(),
                "im": self.matrix.imag.tolist(),
            }
        )

    @staticmethod
    def from_debug_json(text: str) -> "DensityMatrix":
        data = json.loads(text)
        m = np.array(data["re"], dtype=float) + 1j * np.array(data["im"], dtype=float)
        if m.shape != (data["dim"], data["dim"]):
            raise ValidationError("debug JSON dim does not match matrix shape")
        return DensityMatrix(m)


@dataclass(frozen=True)
class PureState:
    """A normalized state vector on a register of qubits."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = _readonly(self.amplitudes).reshape(-1)
        object.__setattr__(self, "amplitudes", a)
        _qubit_count_of(a.shape[0])
        nrm = float(np.vdot(a, a).real)
        if abs(nrm - 1.0) > NORM_TOL:
            raise ValidationError(f"squared norm {nrm} deviates from 1 beyond {NORM_TOL}")

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def qubit_count(self) -> int:
        return self.dim.bit_length() - 1

    def to_density(self) -> DensityMatrix:
        _check_dense_capacity(self.qubit_count)
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition of a Hermitian operator.

    Eigenvalues are sorted descending; ``eigenvectors[:, i]`` belongs to
    ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _readonly(self.eigenvalues).real.astype(float))
        object.__setattr__(self, "eigenvectors", _readonly(self.eigenvectors))


@dataclass(frozen=True)
class QubitRegisterMap:
    """Party labels plus per-subsystem classical flags for a register."""

    labels: tuple[str, ...]
    classical_flags: tuple[bool, ...] = ()

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("register labels must be distinct")
        if not self.classical_flags:
            object.__setattr__(self, "classical_flags", (False,) * len(self.labels))
        elif len(self.classical_flags) != len(self.labels):
            raise ValidationError("classical_flags length must match labels")

    def validate_against(self, rho: DensityMatrix, tol: float = 1e-12) -> None:
        """Check that flagged subsystems are diagonal in the computational basis."""
        if len(self.labels) != rho.qubit_count:
            raise ValidationError("register size does not match the matrix")
        for i, flag in enumerate(self.classical_flags):
            if flag and not _is_pinched(rho.matrix, rho.qubit_count, i, tol):
                raise ValidationError(f"subsystem {self.labels[i]} is not classical")


def default_labels(n: int) -> tuple[str, ...]:
    """Canonical party names: Alice plus Bobs."""
    return ("A",) + tuple(f"B{i}" for i in range(1, n))


def _is_pinched(m: np.ndarray, n: int, sub: int, tol: float) -> bool:
    t = m.reshape((2,) * (2 * n))
    off = np.abs(np.take(np.take(t, 0, axis=sub), 1, axis=sub + n - 1)).max()
    off2 = np.abs(np.take(np.take(t, 1, axis=sub), 0, axis=sub + n - 1)).max()
    return max(off, off2) <= tol


def tensor(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    """Kronecker product; ``a`` occupies the lower-indexed qubits."""
    _check_dense_capacity(a.qubit_count + b.qubit_count)
    return DensityMatrix(np.kron(a.matrix, b.matrix), a.classical + b.classical)


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Reduce to the subsystems in ``keep`` (kept in ascending index order)."""
    n = rho.qubit_count
    keep = sorted(set(int(i) for i in keep))
    if not keep or any(i < 0 or i >= n for i in keep):
        raise ValidationError(f"invalid subsystem set {keep} for {n} qubits")
    drop = [i for i in range(n) if i not in keep]
    t = rho.matrix.reshape((2,) * (2 * n))
    remaining = n
    for i in sorted(drop, reverse=True):
        t = np.trace(t, axis1=i, axis2=i + remaining)
        remaining -= 1
    d = 2 ** len(keep)
    flags = tuple(rho.classical[i] for i in keep)
    return DensityMatrix(t.reshape(d, d), flags)


def partial_trace_pure(psi: PureState, keep) -> DensityMatrix:
    """Reduced density matrix of a pure state, without forming the full projector."""
    n = psi.qubit_count
    keep = sorted(set(int(i) for i in keep))
    if not keep or any(i < 0 or i >= n for i in keep):
        raise ValidationError(f"invalid subsystem set {keep} for {n} qubits")
    _check_dense_capacity(len(keep))
    drop = [i for i in range(n) if i not in keep]
    t = psi.amplitudes.reshape((2,) * n)
    t = np.transpose(t, keep + drop).reshape(2 ** len(keep), 2 ** len(drop))
    return DensityMatrix(t @ t.conj().T)


def permute_subsystems(rho: DensityMatrix, perm) -> DensityMatrix:
    """Reorder tensor factors: output subsystem i is input subsystem perm[i]."""
    n = rho.qubit_count
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(n)):
        raise ValidationError(f"perm {perm} is not a permutation of 0..{n - 1}")
    t = rho.matrix.reshape((2,) * (2 * n))
    t = np.transpose(t, perm + [p + n for p in perm])
    flags = tuple(rho.classical[p] for p in perm)
    return DensityMatrix(t.reshape(rho.dim, rho.dim), flags)


def eigensystem(rho: DensityMatrix | np.ndarray, *, tol: float = 1e-12,
                max_sweeps: int = 100) -> Spectrum:
    """Eigendecomposition by cyclic Jacobi rotations on the Hermitian matrix.

    Sweeps the strict upper triangle with complex Givens rotations until the
    largest off-diagonal magnitude drops below ``tol``.  Raises
    :class:`ConvergenceError` with the residual if ``max_sweeps`` is exhausted.
    """
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if np.abs(m - m.conj().T).max() > 1e-10:
        raise ValidationError("eigensystem requires a Hermitian input")
    a = np.array(m, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    if n == 1:
        return Spectrum(a.real.reshape(1), v)
    iu = np.triu_indices(n, 1)
    for _ in range(max_sweeps):
        off = float(np.abs(a[iu]).max())
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                g = a[p, q]
                ag = abs(g)
                if ag < 1e-300:
                    continue
                w = g / ag
                tau = (a[q, q].real - a[p, p].real) / (2.0 * ag)
                if tau >= 0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                swc = s * w.conjugate()
                sw = s * w
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - swc * col_q
                a[:, q] = sw * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - sw * row_q
                a[q, :] = swc * row_p + c * row_q
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - swc * vq
                v[:, q] = sw * vp + c * vq
    else:
        residual = float(np.abs(a[iu]).max())
        raise ConvergenceError(
            f"Jacobi sweep cap {max_sweeps} reached, off-diagonal residual {residual:.3e}",
            residual=residual,
        )
    ev = np.diag(a).real
    order = np.argsort(ev)[::-1]
    return Spectrum(ev[order], v[:, order])


def purify(rho: DensityMatrix, *, rank_tol: float = 1e-12) -> PureState:
    """A purification of ``rho``; the ancilla is the second tensor factor.

    The ancilla register is padded to the next power of two so the result is a
    valid :class:`PureState` on whole qubits.
    """
    spec = eigensystem(rho)
    lam = np.clip(spec.eigenvalues, 0.0, 1.0)
    keep = lam > rank_tol
    lam = lam[keep]
    lam = lam / lam.sum()
    vecs = spec.eigenvectors[:, keep]
    rank = lam.shape[0]
    anc_qubits = max(0, (rank - 1).bit_length())
    d_e = 2**anc_qubits
    _check_structured_capacity(rho.qubit_count + anc_qubits)
    psi = np.zeros((rho.dim, d_e), dtype=complex)
    psi[:, :rank] = vecs * np.sqrt(lam)
    return PureState(psi.reshape(-1))


def _entropy_from_eigenvalues(ev: np.ndarray, clip_tol: float = 1e-9) -> float:
    lam = np.asarray(ev, dtype=float)
    clipped = np.clip(lam, 0.0, 1.0)
    correction = float(np.abs(clipped - lam).max()) if lam.size else 0.0
    if correction > clip_tol:
        warnings.warn(
            f"eigenvalues clipped to [0,1] by {correction:.3e} before the log",
            RuntimeWarning,
            stacklevel=3,
        )
    pos = clipped[clipped > 0.0]
    return float(-(pos * np.log2(pos)).sum())


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Shannon entropy of the spectrum, in bits; 0*log(0) reads as 0."""
    h = _entropy_from_eigenvalues(eigensystem(rho).eigenvalues)
    return min(max(h, 0.0), float(rho.qubit_count))


def conditional_entropy(rho: DensityMatrix, target, condition) -> float:
    """H(target | condition) = H(target,condition) - H(condition), in bits."""
    target = sorted(set(int(i) for i in target))
    condition = sorted(set(int(i) for i in condition))
    if set(target) & set(condition):
        raise ValidationError("target and condition subsystems must be disjoint")
    joint = partial_trace(rho, target + condition)
    if condition:
        cond = partial_trace(rho, condition)
        return von_neumann_entropy(joint) - von_neumann_entropy(cond)
    return von_neumann_entropy(joint)


def measure_computational(rho: DensityMatrix, subsystem: int) -> DensityMatrix:
    """Pinch one qubit in the computational basis (non-selective Z measurement)."""
    n = rho.qubit_count
    if not 0 <= subsystem < n:
        raise ValidationError(f"subsystem {subsystem} out of range for {n} qubits")
    t = rho.matrix.reshape((2,) * (2 * n)).copy()
    idx = [slice(None)] * (2 * n)
    for a, b in ((0, 1), (1, 0)):
        idx[subsystem] = a
        idx[subsystem + n] = b
        t[tuple(idx)] = 0.0
    flags = list(rho.classical)
    flags[subsystem] = True
    return DensityMatrix(t.reshape(rho.dim, rho.dim), tuple(flags))
