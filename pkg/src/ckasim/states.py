"""The GHZ-mixture state family, its purification, and related constructions.

A family member on N parties (Alice = party 0, Bobs 1..N-1) is a convex
mixture over the k-subsets containing Alice: each term carries a GHZ
projector on the subset and |+><+| on the remaining Bobs.  Local
depolarizing noise acts on every Bob.  The round sampler draws measurement
outcomes for arbitrary X/Z basis assignments directly from the closed-form
branch probabilities, so it works far beyond the dense-matrix qubit cap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb, sqrt

import numpy as np

from .errors import ValidationError
from .qstate import (
    DensityMatrix,
    PureState,
    _check_dense_capacity,
    _check_structured_capacity,
    default_labels,
    partial_trace,
)


def subsets_with_alice(n: int, k: int) -> list[tuple[int, ...]]:
    """All k-subsets of the parties that contain Alice, in lexicographic order."""
    return [(0,) + rest for rest in combinations(range(1, n), k - 1)]


def normalization_count(n: int, k: int) -> int:
    return comb(n - 1, k - 1)


@dataclass(frozen=True)
class GhzMixtureSpec:
    """Parameters of a family member: party count, entangled-subset size,
    per-subset weights, and the per-Bob depolarizing parameter.

    ``weights=None`` means the uniform mixture; uniform weights are kept as
    exact rationals 1/binom(N-1, k-1).
    """

    n: int
    k: int
    weights: tuple[tuple[tuple[int, ...], Fraction | float], ...] | None = None
    noise_p: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError(f"need at least 2 parties, got n={self.n}")
        if not 2 <= self.k <= self.n:
            raise ValidationError(f"k must satisfy 2 <= k <= n, got k={self.k}")
        if not 0.0 <= self.noise_p <= 1.0:
            raise ValidationError(f"noise_p must lie in [0, 1], got {self.noise_p}")
        expected = subsets_with_alice(self.n, self.k)
        if self.weights is None:
            q = Fraction(1, len(expected))
            object.__setattr__(self, "weights", tuple((s, q) for s in expected))
        else:
            items = tuple((tuple(sorted(s)), w) for s, w in self.weights)
            items = tuple(sorted(items))
            subsets = [s for s, _ in items]
            if subsets != expected:
                raise ValidationError(
                    "weights must cover exactly the k-subsets containing Alice"
                )
            if any(w < 0 for _, w in items):
                raise ValidationError("weights must be nonnegative")
            total = sum(w for _, w in items)
            if abs(float(total) - 1.0) > 1e-9:
                raise ValidationError(f"weights must sum to 1, got {float(total)}")
            object.__setattr__(self, "weights", items)

    @property
    def subsets(self) -> list[tuple[int, ...]]:
        return [s for s, _ in self.weights]

    def weight_floats(self) -> np.ndarray:
        return np.array([float(w) for _, w in self.weights], dtype=float)

    @property
    def is_uniform(self) -> bool:
        ws = {w for _, w in self.weights}
        return len(ws) == 1

    def to_json(self) -> str:
        if self.is_uniform:
            weights = "uniform"
        else:
            weights = [
                {"subset": list(s), "q": float(w)} for s, w in self.weights
            ]
        return json.dumps({"n": self.n, "k": self.k, "p": self.noise_p, "weights": weights})

    @staticmethod
    def from_json(text: str) -> "GhzMixtureSpec":
        data = json.loads(text)
        weights = data.get("weights", "uniform")
        if weights == "uniform":
            parsed = None
        else:
            parsed = tuple((tuple(entry["subset"]), float(entry["q"])) for entry in weights)
        return GhzMixtureSpec(int(data["n"]), int(data["k"]), parsed, float(data.get("p", 0.0)))


@dataclass(frozen=True)
class Partition:
    """A bipartition of the N party labels into s_alpha and its complement."""

    s_alpha: tuple[int, ...]
    n: int

    def __post_init__(self):
        s = tuple(sorted(set(int(i) for i in self.s_alpha)))
        object.__setattr__(self, "s_alpha", s)
        if not s or len(s) >= self.n:
            raise ValidationError("s_alpha must be a nonempty proper subset of the parties")
        if any(i < 0 or i >= self.n for i in s):
            raise ValidationError(f"party indices {s} out of range for n={self.n}")

    @property
    def complement(self) -> tuple[int, ...]:
        inside = set(self.s_alpha)
        return tuple(i for i in range(self.n) if i not in inside)

    def contains_alice(self) -> bool:
        return 0 in self.s_alpha

    def label(self) -> str:
        names = default_labels(self.n)
        left = "".join(names[i] for i in self.s_alpha)
        right = "".join(names[i] for i in self.complement)
        return f"{left}|{right}"

    @staticmethod
    def from_string(text: str, n: int) -> "Partition":
        """Parse e.g. "A|B1B2" against the canonical party names."""
        names = default_labels(n)
        index = {name: i for i, name in enumerate(names)}
        halves = text.split("|")
        if len(halves) != 2:
            raise ValidationError(f"partition string must contain one '|': {text!r}")

        def parse_side(side: str) -> list[int]:
            out, rest = [], side
            while rest:
                for name in sorted(index, key=len, reverse=True):
                    if rest.startswith(name):
                        out.append(index[name])
                        rest = rest[len(name):]
                        break
                else:
                    raise ValidationError(f"cannot parse party names in {side!r}")
            return out

        left, right = parse_side(halves[0]), parse_side(halves[1])
        if sorted(left + right) != list(range(n)):
            raise ValidationError(f"{text!r} does not list every party exactly once")
        return Partition(tuple(left), n)


def all_partitions(n: int) -> list[Partition]:
    """Every bipartition, labeled so that Alice sits in s_alpha."""
    out = []
    for size in range(1, n):
        for rest in combinations(range(1, n), size - 1):
            out.append(Partition((0,) + rest, n))
    return out


@dataclass(frozen=True)
class SeparableSpec:
    """An explicitly partition-separable state: a convex mixture of pure
    products across the cut.  Side vectors follow ascending party order
    within each side."""

    partition: Partition
    terms: tuple[tuple[float, np.ndarray, np.ndarray], ...]

    def __post_init__(self):
        n = self.partition.n
        d_s = 2 ** len(self.partition.s_alpha)
        d_t = 2 ** (n - len(self.partition.s_alpha))
        cleaned = []
        total = 0.0
        for q, vs, vt in self.terms:
            q = float(q)
            if q < 0:
                raise ValidationError("term weights must be nonnegative")
            vs = np.asarray(vs, dtype=complex).reshape(-1)
            vt = np.asarray(vt, dtype=complex).reshape(-1)
            if vs.shape[0] != d_s or vt.shape[0] != d_t:
                raise ValidationError("term vector dimensions do not match the partition")
            ns, nt = np.linalg.norm(vs), np.linalg.norm(vt)
            if abs(ns - 1) > 1e-9 or abs(nt - 1) > 1e-9:
                raise ValidationError("term vectors must be normalized")
            vs.setflags(write=False)
            vt.setflags(write=False)
            cleaned.append((q, vs, vt))
            total += q
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"term weights must sum to 1, got {total}")
        object.__setattr__(self, "terms", tuple(cleaned))


@dataclass(frozen=True)
class OverlapStats:
    """Overlap data for a pair of mixture terms: their intersection size and
    the resulting off-diagonal coefficient of Eve's reduced state."""

    subset_a: tuple[int, ...]
    subset_b: tuple[int, ...]
    intersection: tuple[int, ...]
    union: tuple[int, ...]
    s_alpha_beta: int
    e_coeff: float

    def __post_init__(self):
        if self.s_alpha_beta < 1:
            raise ValidationError("term subsets always share Alice")
        if not 0.0 < self.e_coeff <= 1.0:
            raise ValidationError(f"e_coeff {self.e_coeff} outside (0, 1]")


def overlap_stats(spec: GhzMixtureSpec, i: int, j: int) -> OverlapStats:
    subs = spec.subsets
    w = spec.weight_floats()
    sa, sb = set(subs[i]), set(subs[j])
    inter = tuple(sorted(sa & sb))
    union = tuple(sorted(sa | sb))
    s_ab = len(inter)
    coeff = sqrt(w[i] * w[j]) / 2 ** (spec.k - s_ab)
    return OverlapStats(subs[i], subs[j], inter, union, s_ab, coeff)


def eve_overlap_matrix(spec: GhzMixtureSpec) -> np.ndarray:
    """Eve's reduced state in the term basis: entries sqrt(q_a q_b)/2^(k-s_ab)."""
    subs = spec.subsets
    w = spec.weight_floats()
    m = len(subs)
    sets = [set(s) for s in subs]
    out = np.zeros((m, m), dtype=float)
    for i in range(m):
        for j in range(m):
            s_ab = len(sets[i] & sets[j])
            out[i, j] = sqrt(w[i] * w[j]) / 2 ** (spec.k - s_ab)
    return out


def ghz_product_vector(n: int, subset) -> np.ndarray:
    """State vector for one mixture term: GHZ on ``subset``, |+> elsewhere."""
    subset = tuple(sorted(subset))
    others = [i for i in range(n) if i not in subset]
    v = np.zeros(2**n, dtype=complex)
    amp = (1 / sqrt(2)) * (0.5 ** (len(others) / 2))
    for other_bits in range(2 ** len(others)):
        base = 0
        for pos, party in enumerate(others):
            if (other_bits >> (len(others) - 1 - pos)) & 1:
                base |= 1 << (n - 1 - party)
        ones = base
        for party in subset:
            ones |= 1 << (n - 1 - party)
        v[base] += amp
        v[ones] += amp
    return v


def build_ghz_mixture(spec: GhzMixtureSpec) -> DensityMatrix:
    """Assemble the dense family state, including depolarizing noise."""
    _check_dense_capacity(spec.n)
    d = 2**spec.n
    rho = np.zeros((d, d), dtype=complex)
    for subset, w in spec.weights:
        v = ghz_product_vector(spec.n, subset)
        rho += float(w) * np.outer(v, v.conj())
    dm = DensityMatrix(rho)
    if spec.noise_p > 0:
        dm = apply_local_depolarizing(dm, spec.noise_p, range(1, spec.n))
    return dm


def build_purification(spec: GhzMixtureSpec) -> PureState:
    """Purification with Eve holding one ancilla basis state per mixture term.

    Only defined for the noiseless family; the ancilla register has
    ceil(log2(#terms)) qubits and sits after the parties.
    """
    if spec.noise_p != 0.0:
        raise ValidationError("build_purification requires noise_p = 0")
    terms = spec.weights
    count = len(terms)
    anc_qubits = max(0, (count - 1).bit_length())
    _check_structured_capacity(spec.n + anc_qubits)
    d_e = 2**anc_qubits
    psi = np.zeros((2**spec.n, d_e), dtype=complex)
    for idx, (subset, w) in enumerate(terms):
        psi[:, idx] += sqrt(float(w)) * ghz_product_vector(spec.n, subset)
    return PureState(psi.reshape(-1))


def _with_mixed_qubit(reduced: np.ndarray, n: int, target: int) -> np.ndarray:
    """Insert a maximally mixed qubit at position ``target`` of an n-qubit register."""
    d_left = 2**target
    d_right = 2 ** (n - 1 - target)
    t = reduced.reshape(d_left, d_right, d_left, d_right)
    out = np.zeros((d_left, 2, d_right, d_left, 2, d_right), dtype=complex)
    out[:, 0, :, :, 0, :] = t / 2
    out[:, 1, :, :, 1, :] = t / 2
    return out.reshape(2**n, 2**n)


def apply_local_depolarizing(rho: DensityMatrix, p: float, targets) -> DensityMatrix:
    """Mix each target qubit with the maximally mixed state, independently."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"depolarizing parameter must lie in [0, 1], got {p}")
    n = rho.qubit_count
    m = rho.matrix
    for t in sorted(set(int(i) for i in targets)):
        if not 0 <= t < n:
            raise ValidationError(f"target {t} out of range for {n} qubits")
        reduced = partial_trace(DensityMatrix(m), [i for i in range(n) if i != t])
        m = (1 - p) * m + p * _with_mixed_qubit(reduced.matrix, n, t)
    return DensityMatrix(m, rho.classical)


def build_separable_test_state(spec: SeparableSpec) -> DensityMatrix:
    """Dense state of an explicit partition-separable mixture, in canonical
    party order."""
    part = spec.partition
    n = part.n
    _check_dense_capacity(n)
    order = list(part.s_alpha) + list(part.complement)
    perm = np.argsort(order)
    d = 2**n
    rho = np.zeros((d, d), dtype=complex)
    for q, vs, vt in spec.terms:
        full = np.kron(vs, vt).reshape((2,) * n)
        vec = np.transpose(full, perm).reshape(-1)
        rho += q * np.outer(vec, vec.conj())
    return DensityMatrix(rho)


def random_separable_spec(partition: Partition, term_count: int,
                          rng: np.random.Generator) -> SeparableSpec:
    """Haar-random pure products across the cut with Dirichlet-like weights."""
    d_s = 2 ** len(partition.s_alpha)
    d_t = 2 ** (partition.n - len(partition.s_alpha))
    raw = rng.random(term_count) + 1e-3
    weights = raw / raw.sum()

    def haar(d):
        v = rng.normal(size=d) + 1j * rng.normal(size=d)
        return v / np.linalg.norm(v)

    terms = tuple((float(w), haar(d_s), haar(d_t)) for w in weights)
    return SeparableSpec(partition, terms)


def _member_mask(spec: GhzMixtureSpec) -> np.ndarray:
    mask = np.zeros((len(spec.subsets), spec.n), dtype=bool)
    for idx, subset in enumerate(spec.subsets):
        mask[idx, list(subset)] = True
    return mask


def _validate_bases(bases, n: int) -> np.ndarray:
    if len(bases) != n:
        raise ValidationError(f"need one basis per party, got {len(bases)} for n={n}")
    arr = np.array([str(b).upper() for b in bases])
    if not set(arr) <= {"X", "Z"}:
        raise ValidationError(f"bases must be 'X' or 'Z', got {list(bases)}")
    return arr == "X"


def sample_rounds(spec: GhzMixtureSpec, bases, count: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` outcome rows (one bit per party) for fixed basis choices.

    Exact per-term sampling: a drawn term is GHZ on its subset and |+> on the
    rest, so Z-measuring subset members share one uniform bit, an all-X subset
    yields a uniform even-parity string, X outcomes after any Z collapse are
    uniform and independent, and non-members give "+" under X and a uniform
    bit under Z.  Each Bob's outcome is then replaced by a fresh uniform bit
    with probability noise_p.
    """
    basis_x = _validate_bases(bases, spec.n)
    member = _member_mask(spec)
    w = spec.weight_floats()
    w = w / w.sum()
    alpha = rng.choice(len(w), size=count, p=w)
    memb = member[alpha]

    shared_z = rng.integers(0, 2, size=count, dtype=np.uint8)
    u = rng.integers(0, 2, size=(count, spec.n), dtype=np.uint8)
    v = rng.integers(0, 2, size=(count, spec.n), dtype=np.uint8)

    out = np.zeros((count, spec.n), dtype=np.uint8)
    memb_z = memb & ~basis_x[None, :]
    memb_x = memb & basis_x[None, :]
    out[memb_z] = np.broadcast_to(shared_z[:, None], (count, spec.n))[memb_z]
    out[memb_x] = u[memb_x]
    # all subset members measuring X: force even parity via Alice's bit
    all_x = ~memb_z.any(axis=1)
    parity = np.bitwise_xor.reduce(np.where(memb, out, 0), axis=1)
    flip = all_x & (parity == 1)
    out[flip, 0] ^= 1
    nonmemb_z = ~memb & ~basis_x[None, :]
    out[nonmemb_z] = v[nonmemb_z]

    if spec.noise_p > 0:
        noisy = rng.random(size=(count, spec.n - 1)) < spec.noise_p
        fresh = rng.integers(0, 2, size=(count, spec.n - 1), dtype=np.uint8)
        bobs = out[:, 1:]
        out[:, 1:] = np.where(noisy, fresh, bobs)
    return out


def sample_round(spec: GhzMixtureSpec, bases, rng: np.random.Generator) -> tuple[int, ...]:
    """Single-round convenience wrapper around :func:`sample_rounds`."""
    return tuple(int(b) for b in sample_rounds(spec, bases, 1, rng)[0])
