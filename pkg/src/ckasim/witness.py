"""Entanglement witnesses in measurement-statistics space.

For a fixed set of local POVMs, every state maps to a conditional
probability table.  States separable across a bipartition map into a closed
convex set; a state whose table lies outside it can be separated by a
hyperplane whose coefficients double as an operator witness built from the
POVM effects.  The search here is a cutting-plane loop: a restricted LP
proposes coefficients, a best-response oracle over pure product states
across the cut either certifies them or supplies a violated point as a new
constraint.

A certificate is "separated" only if the hyperplane achieves margin 1
against the target (coefficients capped at unit sup-norm), "inside" when
even the restricted LP proves that margin unreachable, and "inconclusive"
when the cut budget runs out first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product as iproduct
from math import sqrt

import numpy as np

from .errors import ValidationError
from .qstate import DensityMatrix, dense_qubit_cap, eigensystem
from .simplex import solve_lp
from .states import Partition

_SQ = 1.0 / sqrt(2.0)
_KET_PLUS = np.array([_SQ, _SQ], dtype=complex)
_KET_MINUS = np.array([_SQ, -_SQ], dtype=complex)
_KET0 = np.array([1.0, 0.0], dtype=complex)
_KET1 = np.array([0.0, 1.0], dtype=complex)


@dataclass(frozen=True)
class MeasurementSet:
    """Per-party measurement settings, each a tuple of POVM effects."""

    effects: tuple[tuple[tuple[np.ndarray, ...], ...], ...]

    def __post_init__(self):
        frozen = []
        for party_settings in self.effects:
            party = []
            for setting in party_settings:
                ops = tuple(np.array(e, dtype=complex) for e in setting)
                total = sum(ops)
                if np.abs(total - np.eye(ops[0].shape[0])).max() > 1e-10:
                    raise ValidationError("POVM effects must sum to the identity")
                for op in ops:
                    if np.abs(op - op.conj().T).max() > 1e-10:
                        raise ValidationError("POVM effects must be Hermitian")
                    if np.linalg.eigvalsh(op)[0] < -1e-10:
                        raise ValidationError("POVM effects must be positive semidefinite")
                    op.setflags(write=False)
                party.append(ops)
            frozen.append(tuple(party))
        object.__setattr__(self, "effects", tuple(frozen))

    @property
    def party_count(self) -> int:
        return len(self.effects)

    def setting_counts(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.effects)

    def outcome_counts(self) -> tuple[int, ...]:
        return tuple(len(p[0]) for p in self.effects)

    def stacked(self, party: int) -> np.ndarray:
        """Effects of one party as an array indexed [setting, outcome, row, col]."""
        return np.array(self.effects[party])


def nbb84_measurements(n: int) -> MeasurementSet:
    """The protocol measurements: setting 0 is the X basis, setting 1 the Z basis."""
    proj_x = (np.outer(_KET_PLUS, _KET_PLUS.conj()), np.outer(_KET_MINUS, _KET_MINUS.conj()))
    proj_z = (np.outer(_KET0, _KET0.conj()), np.outer(_KET1, _KET1.conj()))
    return MeasurementSet(((proj_x, proj_z),) * n)


@dataclass(frozen=True)
class ProbabilityTable:
    """P(outcomes | settings), stored as an array with the N setting axes
    first and the N outcome axes after them."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        n = self.party_count
        if v.ndim != 2 * n:
            raise ValidationError("table must have one setting and one outcome axis per party")
        if v.min() < -1e-9:
            raise ValidationError(f"negative probability {v.min():.3e}")
        sums = v.sum(axis=tuple(range(n, 2 * n)))
        if np.abs(sums - 1.0).max() > 1e-9:
            raise ValidationError("outcome distributions must sum to 1 per setting")
        err = _no_signaling_residual(v, n)
        if err > 1e-9:
            raise ValidationError(f"no-signaling violated by {err:.3e}")

    @property
    def party_count(self) -> int:
        return self.values.ndim // 2


def _no_signaling_residual(v: np.ndarray, n: int) -> float:
    worst = 0.0
    for j in range(n):
        marg = v.sum(axis=n + j)  # drop party j's outcome
        spread = marg.max(axis=j) - marg.min(axis=j)  # vary party j's setting
        worst = max(worst, float(spread.max()))
    return worst


def statistics_of(rho: DensityMatrix, meas: MeasurementSet) -> ProbabilityTable:
    """Born-rule table of a state under the given local measurements."""
    n = meas.party_count
    if rho.qubit_count != n:
        raise ValidationError(
            f"state has {rho.qubit_count} qubits but measurements cover {n} parties"
        )
    rho_t = rho.matrix.reshape((2,) * (2 * n))
    settings = meas.setting_counts()
    outcomes = meas.outcome_counts()
    table = np.zeros(settings + outcomes, dtype=float)
    stacks = [meas.stacked(p) for p in range(n)]
    # Tr(G rho) with G = kron of effects: contract rho[b, a] with G_j[a_j, b_j]
    operands = []
    subs = []
    for j in range(n):
        subs.append([2 * n + j, j + n, j])  # [outcome_j, a_j, b_j]
    rho_subs = list(range(2 * n))  # [b..., a...]
    out_subs = [2 * n + j for j in range(n)]
    for combo in iproduct(*(range(s) for s in settings)):
        ops = [stacks[j][combo[j]] for j in range(n)]
        args = []
        for op, sub in zip(ops, subs):
            args.extend([op, sub])
        p = np.einsum(rho_t, rho_subs, *args, out_subs).real
        table[combo] = p
    return ProbabilityTable(table)


def product_statistics(partition: Partition, state_s: np.ndarray, state_t: np.ndarray,
                       meas: MeasurementSet) -> ProbabilityTable:
    """Table of a pure product state across the partition.

    ``state_s`` lives on the ``s_alpha`` parties (ascending order) and
    ``state_t`` on the complement; these are the extreme points of the
    partition-separable statistics set.
    """
    vec = _product_vector(partition, state_s, state_t)
    return statistics_of(DensityMatrix(np.outer(vec, vec.conj())), meas)


def _product_vector(partition: Partition, state_s, state_t) -> np.ndarray:
    n = partition.n
    vs = np.asarray(state_s, dtype=complex).reshape(-1)
    vt = np.asarray(state_t, dtype=complex).reshape(-1)
    d_s = 2 ** len(partition.s_alpha)
    d_t = 2 ** (n - len(partition.s_alpha))
    if vs.shape[0] != d_s or vt.shape[0] != d_t:
        raise ValidationError("product factor dimensions do not match the partition")
    for v in (vs, vt):
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > 1e-9:
            raise ValidationError("product factors must be normalized")
    order = list(partition.s_alpha) + list(partition.complement)
    perm = np.argsort(order)
    return np.transpose(np.kron(vs, vt).reshape((2,) * n), perm).reshape(-1)


@dataclass(frozen=True)
class WitnessCoefficients:
    """Real hyperplane coefficients indexed like a probability table,
    normalized to unit sup-norm."""

    partition: Partition
    coeffs: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        mx = np.abs(c).max()
        if mx <= 0.0:
            raise ValidationError("witness coefficients must not all vanish")
        if abs(mx - 1.0) > 1e-9:
            raise ValidationError("witness coefficients must be normalized to max |c| = 1")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)


def evaluate_witness(w: WitnessCoefficients, table: ProbabilityTable) -> float:
    """The hyperplane functional: sum of coeffs times probabilities, plus offset."""
    if w.coeffs.shape != table.values.shape:
        raise ValidationError("witness and table are indexed differently")
    return float((w.coeffs * table.values).sum() + w.offset)


def witness_operator(w: WitnessCoefficients | np.ndarray, meas: MeasurementSet) -> np.ndarray:
    """Assemble the operator form: sum of coeffs times tensor products of effects."""
    c = w.coeffs if isinstance(w, WitnessCoefficients) else np.asarray(w, dtype=float)
    n = meas.party_count
    subs_c = list(range(2 * n))  # [s_1..s_n, o_1..o_n]
    args = []
    for j in range(n):
        stack = meas.stacked(j)  # [setting, outcome, row, col]
        args.extend([stack, [j, n + j, 2 * n + j, 3 * n + j]])
    out = [2 * n + j for j in range(n)] + [3 * n + j for j in range(n)]
    w_t = np.einsum(c, subs_c, *args, out)
    d = 2**n
    return w_t.reshape(d, d)


@dataclass(frozen=True)
class FindWitnessOptions:
    max_cuts: int = 200
    tol: float = 1e-6
    restarts: int = 20
    seed: int = 2024
    initial_random: int = 40
    altopt_iters: int = 120


@dataclass(frozen=True)
class SeparationCertificate:
    """Outcome of the cutting-plane search.

    ``lp_values`` records the restricted LP optimum per iteration (it can
    only rise as cuts accumulate).  ``cut_points`` keeps the separable
    statistics collected along the way, flattened one per row.
    """

    status: str  # "separated" | "inside" | "inconclusive"
    witness: WitnessCoefficients | None
    violation: float | None
    cut_count: int
    oracle: str  # "grid" | "altopt"
    oracle_min: float | None = None
    grid_min: float | None = None
    lp_values: tuple[float, ...] = ()
    cut_points: np.ndarray | None = field(default=None, repr=False)

    def to_json(self) -> str:
        names = None
        coeffs = {}
        if self.witness is not None:
            table_shape = self.witness.coeffs.shape
            n = len(table_shape) // 2
            for idx in np.ndindex(table_shape):
                val = float(self.witness.coeffs[idx])
                if abs(val) > 1e-12:
                    key = "".join(map(str, idx[:n])) + "|" + "".join(map(str, idx[n:]))
                    coeffs[key] = val
            names = [
                _party_names(self.witness.partition)[i]
                for i in self.witness.partition.s_alpha
            ]
        return json.dumps(
            {
                "partition": names,
                "coeffs": coeffs,
                "violation": self.violation,
                "status": self.status,
                "oracle": self.oracle,
            }
        )


def _party_names(partition: Partition) -> tuple[str, ...]:
    from .qstate import default_labels

    return default_labels(partition.n)


def _haar_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def _seed_points(partition: Partition, meas: MeasurementSet,
                 rng: np.random.Generator, count_random: int) -> list[np.ndarray]:
    n = partition.n
    points = []
    if n <= 3:
        single = (_KET0, _KET1, _KET_PLUS, _KET_MINUS)
        for combo in iproduct(range(4), repeat=n):
            vec = np.array([1.0], dtype=complex)
            for c in combo:
                vec = np.kron(vec, single[c])
            rho = DensityMatrix(np.outer(vec, vec.conj()))
            points.append(statistics_of(rho, meas).values.reshape(-1))
    d_s = 2 ** len(partition.s_alpha)
    d_t = 2 ** (n - len(partition.s_alpha))
    for _ in range(count_random):
        table = product_statistics(
            partition, _haar_vector(d_s, rng), _haar_vector(d_t, rng), meas
        )
        points.append(table.values.reshape(-1))
    return points


def _grouped_operator(w_op: np.ndarray, partition: Partition) -> np.ndarray:
    """Reorder the witness operator so the s_alpha parties come first."""
    n = partition.n
    perm = list(partition.s_alpha) + list(partition.complement)
    t = w_op.reshape((2,) * (2 * n))
    t = np.transpose(t, perm + [n + p for p in perm])
    d = 2**n
    return t.reshape(d, d)


def _min_eigvec(matrix: np.ndarray) -> tuple[float, np.ndarray]:
    spec = eigensystem(matrix)
    return float(spec.eigenvalues[-1]), spec.eigenvectors[:, -1]


def _alternating_minimum(w4: np.ndarray, d_s: int, d_t: int, rng: np.random.Generator,
                         restarts: int, iters: int) -> list[tuple[float, np.ndarray, np.ndarray]]:
    """Best-response descent over pure product states (grouped bipartition).

    Each half-step is an exact minimizer (smallest eigenvector of the
    effective operator on that side), so the value sequence is monotone.
    """
    results = []
    for _ in range(restarts):
        psi = _haar_vector(d_s, rng)
        chi = _haar_vector(d_t, rng)
        prev = np.inf
        val = np.inf
        for _ in range(iters):
            m_s = np.einsum("k,ikjl,l->ij", chi.conj(), w4, chi)
            _, psi = _min_eigvec(m_s)
            m_t = np.einsum("i,ikjl,j->kl", psi.conj(), w4, psi)
            val, chi = _min_eigvec(m_t)
            if abs(prev - val) < 1e-13:
                break
            prev = val
        results.append((val, psi, chi))
    results.sort(key=lambda item: item[0])
    return results


def find_witness(target: ProbabilityTable, partition: Partition, meas: MeasurementSet,
                 opts: FindWitnessOptions | None = None) -> SeparationCertificate:
    """Cutting-plane search for a margin-1 separating hyperplane.

    Maintains a finite set V of partition-separable statistics and
    alternates between (a) an LP choosing unit-sup-norm coefficients that
    are nonnegative on V and as negative as possible on the target, and (b)
    a best-response oracle over pure product states across the cut.  The
    oracle either validates the hyperplane or contributes its minimizer to
    V.  If the LP optimum ever rises above -1 the target is declared inside
    (the restricted LP lower-bounds the full problem, so no margin-1
    witness exists at all).
    """
    opts = opts or FindWitnessOptions()
    n = partition.n
    if target.party_count != n or meas.party_count != n:
        raise ValidationError("target table, partition, and measurements disagree on N")
    if n > dense_qubit_cap():
        raise ValidationError(f"witness search needs n <= dense cap, got n={n}")
    rng = np.random.default_rng(opts.seed)
    p_target = target.values.reshape(-1)
    dim = p_target.size
    block_count = float(np.prod(meas.setting_counts()))

    points = _seed_points(partition, meas, rng, opts.initial_random)
    # coarse rounding: near-duplicate cuts add nothing and breed
    # near-singular LP bases
    seen = {np.round(p, 6).tobytes() for p in points}
    d_s = 2 ** len(partition.s_alpha)
    d_t = 2 ** (n - len(partition.s_alpha))
    lp_values: list[float] = []
    working: set[int] = set(range(len(points)))

    for cut in range(opts.max_cuts):
        value, coeff = _witness_lp(p_target, points, dim, working)
        lp_values.append(value)
        # the restricted LP lower-bounds the full one; margin 1 unreachable
        # there means unreachable everywhere (1e-7 absorbs solver roundoff,
        # which matters when the true optimum sits exactly at -1)
        if value > -1.0 + 1e-7:
            return SeparationCertificate(
                "inside", None, None, cut, "altopt",
                lp_values=tuple(lp_values), cut_points=np.array(points),
            )
        coeff = coeff / np.abs(coeff).max()
        w_op = witness_operator(coeff.reshape(target.values.shape), meas)
        w4 = _grouped_operator(w_op, partition).reshape(d_s, d_t, d_s, d_t)
        branches = _alternating_minimum(w4, d_s, d_t, rng, opts.restarts, opts.altopt_iters)
        worst = branches[0][0]
        if worst >= -opts.tol:
            witness, violation, oracle_min = _lift_and_normalize(
                coeff, p_target, worst, block_count, partition, target.values.shape
            )
            return SeparationCertificate(
                "separated", witness, violation, cut, "altopt",
                oracle_min=oracle_min, lp_values=tuple(lp_values),
                cut_points=np.array(points),
            )
        grew = False
        for val, psi, chi in branches:
            if val >= -opts.tol:
                break
            flat = product_statistics(partition, psi, chi, meas).values.reshape(-1)
            key = np.round(flat, 6).tobytes()
            if key in seen:
                continue
            seen.add(key)
            points.append(flat)
            grew = True
        if not grew:
            # oracle only reproduces known points: numerically stuck
            break
    return SeparationCertificate(
        "inconclusive", None, None, len(lp_values), "altopt",
        lp_values=tuple(lp_values), cut_points=np.array(points),
    )


def _witness_lp(p_target: np.ndarray, points: list[np.ndarray], dim: int,
                working: set[int]) -> tuple[float, np.ndarray]:
    """min c.P_target  s.t.  c.P_v >= 0 for v in V,  |c|_inf <= 1.

    Substituting z = 1 - c (so z in [0, 2]) turns every right-hand side
    nonnegative: the all-slack basis z = 0 is already feasible and the
    two-phase machinery is never needed.  Each table sums to the number of
    setting combinations, which supplies the constant terms.

    The simplex only sees a working subset of V; points the tentative
    optimum violates are pulled in and the solve repeats, so the result is
    exactly the full-V optimum while the tableaus stay small and far less
    degenerate.  ``working`` carries the active set across calls.
    """
    v_mat = np.array(points)
    block_t = float(p_target.sum())
    obj = -p_target
    working |= set(range(max(0, len(points) - 64), len(points)))
    for _ in range(40):
        idx = sorted(working)
        sub = v_mat[idx]
        a_ub = np.vstack([sub, np.eye(dim)])
        b_ub = np.concatenate([sub.sum(axis=1), np.full(dim, 2.0)])
        res = solve_lp(obj, a_ub, b_ub)
        if res.status != "optimal":
            raise ValidationError(f"witness LP ended {res.status}")
        coeff = 1.0 - res.x
        values = v_mat @ coeff
        violated = np.where(values < -1e-9)[0]
        new = [int(i) for i in violated if int(i) not in working]
        if not new:
            working.clear()
            working.update(int(i) for i in idx if values[i] <= 1e-6)
            return float(block_t + res.value), coeff
        working.update(new)
    raise ValidationError("witness LP working set failed to close")


def _lift_and_normalize(coeff: np.ndarray, p_target: np.ndarray, oracle_min: float,
                        block_count: float, partition: Partition, shape):
    """Shift the hyperplane up by the residual oracle violation.

    A uniform addition to every coefficient moves all table values by the
    same amount (each setting block sums to one), so the witness keeps its
    operator form.  The shift is capped so a margin-1 certificate stays at
    margin 1.
    """
    value = float(coeff @ p_target)
    lift = max(0.0, -oracle_min)
    if value <= -1.0:
        lift = min(lift, -1.0 - value)
    shifted = coeff + lift / block_count
    shifted = shifted / np.abs(shifted).max()
    witness = WitnessCoefficients(partition, shifted.reshape(shape))
    violation = float(shifted @ p_target)
    return witness, violation, oracle_min + lift


def grid_product_minimum(w: WitnessCoefficients, meas: MeasurementSet,
                         step_degrees: float = 2.0) -> float:
    """Exhaustive validation oracle for partitions with a single-qubit side.

    Grids the lone qubit over the Bloch sphere and minimizes the other side
    exactly (smallest eigenvalue of the effective operator), so only one
    sphere is discretized.  Independent of the search path: eigenvalues come
    from numpy.
    """
    partition = w.partition
    n = partition.n
    if len(partition.s_alpha) == 1:
        single_first = list(partition.s_alpha) + list(partition.complement)
    elif len(partition.complement) == 1:
        single_first = list(partition.complement) + list(partition.s_alpha)
    else:
        raise ValidationError("grid oracle needs a partition with a single-qubit side")
    w_op = witness_operator(w, meas)
    t = w_op.reshape((2,) * (2 * n))
    t = np.transpose(t, single_first + [n + p for p in single_first])
    d_o = 2 ** (n - 1)
    w4 = t.reshape(2, d_o, 2, d_o)

    thetas = np.deg2rad(np.arange(0.0, 180.0 + 1e-9, step_degrees))
    phis = np.deg2rad(np.arange(0.0, 360.0, step_degrees))
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    amp0 = np.cos(tt / 2).reshape(-1)
    amp1 = (np.sin(tt / 2) * np.exp(1j * pp)).reshape(-1)
    # effective operators on the big side, one per grid point
    m_eff = (
        np.einsum("i,ikjl,j->kl", np.array([1, 0]), w4, np.array([1, 0]))[None] * (amp0 * amp0.conj())[:, None, None]
        + np.einsum("i,ikjl,j->kl", np.array([0, 1]), w4, np.array([0, 1]))[None] * (amp1 * amp1.conj())[:, None, None]
        + w4[0, :, 1, :][None] * (amp0.conj() * amp1)[:, None, None]
        + w4[1, :, 0, :][None] * (amp1.conj() * amp0)[:, None, None]
    )
    eigs = np.linalg.eigvalsh(m_eff)
    return float(eigs[:, 0].min()) + w.offset
