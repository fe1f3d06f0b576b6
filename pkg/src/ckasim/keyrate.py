"""Asymptotic conference key rates, three ways.

Closed forms for the uniform GHZ-mixture family under per-Bob depolarizing
noise, an entropy route that evaluates H(X|E) and the per-Bob leakage
H(X|Y_i) from a purification of the (possibly noisy) state, and the
no-key check for explicitly partition-separable states.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log2

import numpy as np

from .errors import CkasimError, ValidationError
from .qstate import (
    DensityMatrix,
    PureState,
    _entropy_from_eigenvalues,
    conditional_entropy,
    eigensystem,
    measure_computational,
    partial_trace,
    purify,
)
from .states import (
    GhzMixtureSpec,
    SeparableSpec,
    build_ghz_mixture,
    build_purification,
)

RATE_TOL = 1e-9


def binary_entropy(x: float) -> float:
    """h(x) = -x log2 x - (1-x) log2 (1-x), with h(0) = h(1) = 0."""
    if not -1e-12 <= x <= 1 + 1e-12:
        raise ValidationError(f"binary entropy argument {x} outside [0, 1]")
    x = min(max(float(x), 0.0), 1.0)
    if x in (0.0, 1.0):
        return 0.0
    return -x * log2(x) - (1 - x) * log2(1 - x)


@dataclass(frozen=True)
class ProtocolParams:
    """Observed error parameters: odd-X-parity probability and per-Bob
    disagreement probabilities."""

    q_x: float
    q_ab: tuple[float, ...]

    def __post_init__(self):
        vals = (self.q_x,) + tuple(self.q_ab)
        if any(not 0.0 <= v <= 1.0 for v in vals):
            raise ValidationError("protocol parameters must lie in [0, 1]")


@dataclass(frozen=True)
class RateReport:
    """A key-rate evaluation with its entropy ingredients.

    ``r_unclamped`` keeps the signed difference so threshold searches can
    bracket the zero crossing.
    """

    r_infinity: float
    r_unclamped: float
    h_x_given_e: float
    leak_terms: tuple[float, ...]
    worst_bob: int
    method: str


def _check_family_params(n: int, k: int, p: float) -> None:
    if n < 2 or not 2 <= k <= n:
        raise ValidationError(f"need n >= 2 and 2 <= k <= n, got n={n}, k={k}")
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"noise parameter must lie in [0, 1], got {p}")


def closed_form_params(n: int, k: int, p: float) -> ProtocolParams:
    """Noise-dependent error parameters of the uniform family.

    q_x = (1 - (1-p)^(N-1))/2 and, identically for every Bob,
    q_ab = (N-1 - (1-p)(k-1)) / (2(N-1)); at p = 0 these reduce to q_x = 0
    and q_ab = (N-k)/(2(N-1)).
    """
    _check_family_params(n, k, p)
    q_x = (1.0 - (1.0 - p) ** (n - 1)) / 2.0
    q_ab = (n - 1 - (1.0 - p) * (k - 1)) / (2.0 * (n - 1))
    return ProtocolParams(q_x, (q_ab,) * (n - 1))


def _report_from_params(params: ProtocolParams, method: str) -> RateReport:
    h_x_given_e = 1.0 - binary_entropy(params.q_x)
    leaks = tuple(binary_entropy(q) for q in params.q_ab)
    worst = int(np.argmax(leaks))
    unclamped = h_x_given_e - leaks[worst]
    return RateReport(max(0.0, unclamped), unclamped, h_x_given_e, leaks, worst, method)


def rate_nbb84(n: int, k: int, p: float) -> RateReport:
    """Closed-form rate: max(0, 1 - h(q_x) - max_i h(q_ab_i))."""
    return _report_from_params(closed_form_params(n, k, p), "closed_form")


def noiseless_rate_log_form(n: int, k: int) -> float:
    """The p = 0 rate written as two weighted logarithms.

    Algebraically identical to ``rate_nbb84(n, k, 0)``; kept separate as an
    independent evaluation path for consistency checks.
    """
    _check_family_params(n, k, 0.0)
    u = (n - k) / (n - 1)
    v = (n + k - 2) / (n - 1)
    t1 = 0.5 * u * log2(u) if u > 0 else 0.0
    t2 = 0.5 * v * log2(v) if v > 0 else 0.0
    return t1 + t2


def rate_bipartite_concat(n: int, p: float) -> float:
    """Rate of running N-1 noisy bipartite key exchanges in sequence:
    max(0, (1 - 2 h(p/2)) / (N-1))."""
    if n < 2:
        raise ValidationError(f"need n >= 2, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"noise parameter must lie in [0, 1], got {p}")
    return max(0.0, (1.0 - 2.0 * binary_entropy(p / 2.0)) / (n - 1))


def _xe_reductions(psi: PureState, n: int) -> tuple[np.ndarray, np.ndarray]:
    """From a purification on (parties, ancilla), the pinched Alice+Eve state
    and Eve's reduced state, without forming the global projector."""
    d_e = psi.dim // 2**n
    t = psi.amplitudes.reshape(2, 2 ** (n - 1), d_e)
    rho_ae = np.einsum("abe,cbf->aecf", t, t.conj()).reshape(2 * d_e, 2 * d_e)
    blocks = rho_ae.reshape(2, d_e, 2, d_e).copy()
    blocks[0, :, 1, :] = 0.0
    blocks[1, :, 0, :] = 0.0
    rho_xe = blocks.reshape(2 * d_e, 2 * d_e)
    rho_e = np.einsum("abe,abf->ef", t, t.conj())
    return rho_xe, rho_e


def _entropy_of(matrix: np.ndarray) -> float:
    return _entropy_from_eigenvalues(eigensystem(matrix).eigenvalues)


def _pinched_pair_leak(rho_ab: DensityMatrix) -> float:
    """H(X|Y) after both qubits of a two-qubit state are measured in Z."""
    pinched = measure_computational(measure_computational(rho_ab, 0), 1)
    return conditional_entropy(pinched, [0], [1])


def rate_entropy_numeric(spec: GhzMixtureSpec) -> RateReport:
    """Entropy-based rate of a family member.

    Builds a purification (the term-labeled one when noiseless, an
    eigen-purification otherwise), pinches Alice's qubit, and evaluates
    H(X|E) together with H(X|Y_i) for every Bob from the reduced states.
    """
    state = build_ghz_mixture(spec)
    if spec.noise_p == 0.0:
        psi = build_purification(spec)
    else:
        psi = purify(state)
    rho_xe, rho_e = _xe_reductions(psi, spec.n)
    h_x_given_e = _entropy_of(rho_xe) - _entropy_of(rho_e)
    leaks = []
    for bob in range(1, spec.n):
        rho_ab = partial_trace(state, [0, bob])
        leaks.append(_pinched_pair_leak(rho_ab))
    leaks = tuple(leaks)
    worst = int(np.argmax(leaks))
    unclamped = h_x_given_e - leaks[worst]
    return RateReport(
        max(0.0, unclamped), unclamped, h_x_given_e, leaks, worst, "entropy_numeric"
    )


@dataclass(frozen=True)
class SeparableKeyReport:
    """Outcome of the no-key check on a partition-separable state."""

    h_x_given_e_total: float
    h_x_given_f: float
    leaks: tuple[float, ...]
    min_leak: float
    implied_rate: float
    chain_holds: bool
    passes: bool


def verify_no_key_separable(spec: SeparableSpec) -> SeparableKeyReport:
    """Check that a partition-separable state admits no conference key.

    Eve is handed the mixing index twice (registers F and F') alongside the
    global superposition, everyone measures Z, and the report compares her
    conditional entropy H(X|EFF') against every Bob's H(X|Y_l).  The
    separability structure forces H(X|Y_l) >= H(X|E_tot) for complement
    Bobs, hence a nonpositive rate.
    """
    part = spec.partition
    if not part.contains_alice():
        raise ValidationError("the separable side s_alpha must contain Alice")
    if not part.complement:
        raise ValidationError("the complement must contain at least one Bob")
    n = part.n
    m = len(spec.terms)
    order = list(part.s_alpha) + list(part.complement)
    perm = np.argsort(order)

    # global vector on (parties, F, F'): sqrt(q_j) |prod_j>|j>|j>
    psi = np.zeros((2**n, m, m), dtype=complex)
    for j, (q, vs, vt) in enumerate(spec.terms):
        full = np.kron(vs, vt).reshape((2,) * n)
        psi[:, j, j] = np.sqrt(q) * np.transpose(full, perm).reshape(-1)

    t = psi.reshape(2, 2 ** (n - 1), m * m)
    blocks = [np.einsum("bx,by->xy", t[a], t[a].conj()) for a in (0, 1)]
    eig_xe = np.concatenate([eigensystem(b).eigenvalues for b in blocks])
    h_xe = _entropy_from_eigenvalues(eig_xe)
    h_e = _entropy_of(blocks[0] + blocks[1])
    h_x_given_e_total = h_xe - h_e

    # H(X|F) from the diagonal classical-quantum reduction
    qs = np.array([q for q, _, _ in spec.terms])
    p_alice = np.array(
        [_alice_z_distribution(part, vs) for _, vs, _ in spec.terms]
    )
    joint = (qs[:, None] * p_alice).reshape(-1)
    h_x_given_f = _entropy_from_eigenvalues(joint) - _entropy_from_eigenvalues(qs)

    leaks = tuple(
        _pinched_pair_leak(_two_party_reduction(spec, bob)) for bob in range(1, n)
    )
    complement_bobs = [b for b in part.complement]
    min_leak = min(leaks[b - 1] for b in complement_bobs)
    implied_rate = h_x_given_e_total - max(leaks)
    chain_holds = min_leak >= h_x_given_e_total - RATE_TOL
    passes = implied_rate <= RATE_TOL
    return SeparableKeyReport(
        h_x_given_e_total, h_x_given_f, leaks, min_leak, implied_rate, chain_holds, passes
    )


def _alice_z_distribution(part, vs: np.ndarray) -> np.ndarray:
    """Alice's Z-outcome probabilities from her side's pure state."""
    pos = part.s_alpha.index(0)
    side = vs.reshape((2,) * len(part.s_alpha))
    moved = np.moveaxis(side, pos, 0).reshape(2, -1)
    return np.array([float(np.vdot(moved[a], moved[a]).real) for a in (0, 1)])


def _two_party_reduction(spec: SeparableSpec, bob: int) -> DensityMatrix:
    """The Alice-Bob_l reduced state of the separable mixture."""
    part = spec.partition
    d = np.zeros((4, 4), dtype=complex)
    for q, vs, vt in spec.terms:
        if bob in part.complement:
            rho_a = _side_single_reduction(part.s_alpha, vs, 0)
            rho_b = _side_single_reduction(part.complement, vt, bob)
            d += q * np.kron(rho_a, rho_b)
        else:
            d += q * _side_pair_reduction(part.s_alpha, vs, 0, bob)
    return DensityMatrix(d)


def _side_single_reduction(side: tuple[int, ...], vec: np.ndarray, party: int) -> np.ndarray:
    pos = side.index(party)
    t = np.moveaxis(vec.reshape((2,) * len(side)), pos, 0).reshape(2, -1)
    return t @ t.conj().T


def _side_pair_reduction(side: tuple[int, ...], vec: np.ndarray,
                         first: int, second: int) -> np.ndarray:
    pos = (side.index(first), side.index(second))
    t = np.moveaxis(vec.reshape((2,) * len(side)), pos, (0, 1)).reshape(4, -1)
    return t @ t.conj().T


def noise_threshold(n: int, k: int, *, tol: float = 1e-9, grid_points: int = 100) -> float:
    """Largest tolerable depolarizing noise: the root of the signed rate.

    Verifies the signed rate is non-increasing on a bracketing grid, then
    bisects to ``tol``.
    """
    _check_family_params(n, k, 0.0)
    if rate_nbb84(n, k, 0.0).r_unclamped <= 0.0:
        raise CkasimError(
            f"rate is already nonpositive at p = 0 for (N={n}, k={k}); no crossing"
        )
    ps = np.linspace(0.0, 1.0, grid_points)
    vals = [rate_nbb84(n, k, float(p)).r_unclamped for p in ps]
    if any(b > a + 1e-12 for a, b in zip(vals, vals[1:])):
        raise CkasimError("signed rate is not monotone on the bracketing grid")
    hi_idx = next(i for i, v in enumerate(vals) if v <= 0.0)
    lo, hi = float(ps[hi_idx - 1]), float(ps[hi_idx])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if rate_nbb84(n, k, mid).r_unclamped > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
