"""Monte Carlo simulation of the X-test / Z-key conference protocol.

Rounds are independent; outcomes are drawn in fixed-size chunks whose RNG
streams derive from (seed, chunk_index), so results are reproducible and
independent of how the chunks would be distributed across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .errors import EstimationError, ValidationError
from .keyrate import binary_entropy, closed_form_params
from .states import GhzMixtureSpec, sample_rounds

_CHUNK = 1 << 16


@dataclass(frozen=True)
class ProtocolConfig:
    spec: GhzMixtureSpec
    rounds: int
    test_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValidationError(f"need at least one round, got {self.rounds}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValidationError(
                f"test_fraction must lie strictly in (0, 1), got {self.test_fraction}"
            )
        if self.rounds * self.test_fraction < 1.0:
            raise ValidationError("expected number of test rounds is below one")


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    basis_choice: str  # "test" (all X) or "key" (all Z)
    outcomes: tuple[int, ...]

    def __post_init__(self):
        if self.basis_choice not in ("test", "key"):
            raise ValidationError(f"unknown basis choice {self.basis_choice!r}")


@dataclass(frozen=True)
class EstimateReport:
    """Empirical protocol parameters and the rate they imply.

    Standard errors are the binomial sqrt(q(1-q)/n) at the estimates.
    """

    q_x_hat: float
    q_ab_hat: tuple[float, ...]
    r_hat: float
    r_unclamped: float
    q_x_se: float
    q_ab_se: tuple[float, ...]
    round_counts: tuple[int, int]  # (test, key)


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk_index,)))


def run_protocol(cfg: ProtocolConfig, record_rounds: bool = False):
    """Simulate the protocol; returns the estimate report, plus the round
    stream when ``record_rounds`` is set.

    Per round a biased coin picks test (all parties measure X) or key (all
    measure Z).  Test rounds count odd X-parity strings; key rounds count
    per-Bob disagreements with Alice.
    """
    n = cfg.spec.n
    bases_x = ("X",) * n
    bases_z = ("Z",) * n
    test_count = 0
    odd_count = 0
    key_count = 0
    disagree = np.zeros(n - 1, dtype=np.int64)
    records: list[RoundRecord] = []

    done = 0
    chunk_index = 0
    while done < cfg.rounds:
        size = min(_CHUNK, cfg.rounds - done)
        rng = _chunk_rng(cfg.seed, chunk_index)
        is_test = rng.random(size) < cfg.test_fraction
        n_test = int(is_test.sum())
        n_key = size - n_test
        test_out = sample_rounds(cfg.spec, bases_x, n_test, rng) if n_test else None
        key_out = sample_rounds(cfg.spec, bases_z, n_key, rng) if n_key else None

        if test_out is not None:
            parity = np.bitwise_xor.reduce(test_out, axis=1)
            odd_count += int(parity.sum())
            test_count += n_test
        if key_out is not None:
            diff = key_out[:, 1:] ^ key_out[:, :1]
            disagree += diff.sum(axis=0)
            key_count += n_key

        if record_rounds:
            t_idx = 0
            k_idx = 0
            for offset, flag in enumerate(is_test):
                if flag:
                    outs = test_out[t_idx]
                    t_idx += 1
                    choice = "test"
                else:
                    outs = key_out[k_idx]
                    k_idx += 1
                    choice = "key"
                records.append(
                    RoundRecord(done + offset, choice, tuple(int(b) for b in outs))
                )
        done += size
        chunk_index += 1

    if test_count == 0 or key_count == 0:
        raise EstimationError(
            f"cannot estimate: {test_count} test and {key_count} key rounds realized"
        )
    q_x_hat = odd_count / test_count
    q_ab_hat = tuple(float(d) / key_count for d in disagree)
    r_unclamped = 1.0 - binary_entropy(q_x_hat) - max(binary_entropy(q) for q in q_ab_hat)
    report = EstimateReport(
        q_x_hat=q_x_hat,
        q_ab_hat=q_ab_hat,
        r_hat=max(0.0, r_unclamped),
        r_unclamped=r_unclamped,
        q_x_se=sqrt(q_x_hat * (1 - q_x_hat) / test_count),
        q_ab_se=tuple(sqrt(q * (1 - q) / key_count) for q in q_ab_hat),
        round_counts=(test_count, key_count),
    )
    if record_rounds:
        return report, records
    return report


@dataclass(frozen=True)
class SweepRow:
    """One grid point of a simulation sweep next to its closed-form values."""

    n: int
    k: int
    p: float
    rounds: int
    q_x_hat: float
    q_ab_hat_max: float
    r_hat: float
    r_closed: float
    z_max: float
    error: str | None = None


def _z_score(estimate: float, truth: float, count: int) -> float:
    se = sqrt(truth * (1 - truth) / count)
    if se == 0.0:
        return 0.0 if estimate == truth else float("inf")
    return (estimate - truth) / se


def sweep(points, rounds: int, *, seed: int = 0, test_fraction: float = 0.1) -> list[SweepRow]:
    """Run the protocol on each (n, k, p) grid point and compare against the
    closed forms; failed points carry their error and NaN estimates."""
    points = list(points)
    if not points:
        raise ValidationError("sweep grid is empty")
    rows = []
    for index, (n, k, p) in enumerate(points):
        point_seed = int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1)[0])
        try:
            spec = GhzMixtureSpec(n, k, noise_p=p)
            cfg = ProtocolConfig(spec, rounds, test_fraction, point_seed)
            report = run_protocol(cfg)
            params = closed_form_params(n, k, p)
            z_vals = [_z_score(report.q_x_hat, params.q_x, report.round_counts[0])]
            z_vals += [
                _z_score(est, truth, report.round_counts[1])
                for est, truth in zip(report.q_ab_hat, params.q_ab)
            ]
            r_closed = max(
                0.0,
                1.0 - binary_entropy(params.q_x) - max(binary_entropy(q) for q in params.q_ab),
            )
            rows.append(
                SweepRow(
                    n, k, p, rounds,
                    report.q_x_hat, max(report.q_ab_hat), report.r_hat,
                    r_closed, max(abs(z) for z in z_vals),
                )
            )
        except (ValidationError, EstimationError) as exc:
            nan = float("nan")
            rows.append(SweepRow(n, k, p, rounds, nan, nan, nan, nan, nan, str(exc)))
    return rows
