"""A dense two-phase simplex solver.

Solves  min c.x  subject to  A x <= b,  x >= 0.

Numerical posture, tuned for the degenerate cutting-plane LPs in this
package: the right-hand side is epsilon-perturbed up front (Charnes style)
so ties in the ratio test are rare, pricing is Dantzig's rule with a switch
to Bland's anti-cycling rule on stalls, the tableau is refactorized from
the original data at a fixed cadence so rounding cannot accumulate, and
the final basis is re-solved against the unperturbed right-hand side with
dual-simplex cleanup.  The returned vertex is verified against the original
constraints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LpError

_PIVOT_EPS = 1e-7  # entries below this are noise-scale; pivoting on them thrashes
_COST_EPS = 1e-9
_FEAS_EPS = 1e-7
_RATIO_TIE = 1e-9
_STALL_LIMIT = 40
_REFACTOR_EVERY = 25
_PERTURB = 1e-7


@dataclass(frozen=True)
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    value: float | None
    iterations: int


def solve_lp(c, a_ub, b_ub, *, max_iter: int = 30_000) -> LpResult:
    """Solve with escalating pivot thresholds.

    The noise floor of a tableau depends on how near-parallel the rows are;
    when pivoting thrashes at one eligibility threshold, a coarser one
    usually sails through, and the final feasibility verification keeps the
    escalation honest.
    """
    last: LpError | None = None
    for pivot_eps in (_PIVOT_EPS, 1e-6, 1e-5):
        try:
            return _solve_lp_once(c, a_ub, b_ub, pivot_eps, max_iter)
        except LpError as exc:
            last = exc
    raise last


def _solve_lp_once(c, a_ub, b_ub, pivot_eps: float, max_iter: int) -> LpResult:
    c = np.asarray(c, dtype=float).reshape(-1)
    a = np.atleast_2d(np.asarray(a_ub, dtype=float))
    b = np.asarray(b_ub, dtype=float).reshape(-1)
    m, n = a.shape
    if c.shape[0] != n or b.shape[0] != m:
        raise ValueError("inconsistent LP dimensions")
    a_orig = a.copy()
    b_orig = b.copy()

    # normalize rows to b >= 0; slack coefficient flips sign with the row
    a = a.copy()
    b = b.copy()
    slack_sign = np.ones(m)
    neg = b < 0
    a[neg] *= -1
    b[neg] *= -1
    slack_sign[neg] = -1

    art_rows = np.where(neg)[0]
    n_art = len(art_rows)
    m_full = m
    total = n + m + n_art
    full = np.zeros((m, total + 1))
    full[:, :n] = a
    full[np.arange(m), n + np.arange(m)] = slack_sign
    for idx, row in enumerate(art_rows):
        full[row, n + m + idx] = 1.0
    # graded perturbation breaks the ties that make degenerate bases cycle
    scale = np.maximum(np.abs(b), 1.0)
    b_pert = b + _PERTURB * scale * (1.0 + np.arange(m)) / m
    full[:, -1] = b_pert

    tab = full.copy()
    basis = np.empty(m, dtype=int)
    basis[:] = n + np.arange(m)
    for idx, row in enumerate(art_rows):
        basis[row] = n + m + idx
    row_ids = np.arange(m)  # original row of each current tableau row

    iterations = 0

    def refactorize() -> None:
        nonlocal tab
        base = full[:, basis]
        try:
            tab = np.linalg.solve(base, full)
        except np.linalg.LinAlgError as exc:
            raise LpError("basis matrix became singular", iterations=iterations) from exc

    def pivot(row: int, col: int) -> None:
        tab[row] /= tab[row, col]
        column = tab[:, col].copy()
        column[row] = 0.0
        tab[:, :] -= np.outer(column, tab[row])
        basis[row] = col

    def dual_steps(costs: np.ndarray, allowed: np.ndarray, max_steps: int = 2000) -> bool:
        """Restore b >= 0 while keeping the reduced costs nonnegative.

        Needed after swapping the perturbed right-hand side back out, and
        after refactorization exposes drift in the ratio tests.
        """
        nonlocal iterations
        for _ in range(max_steps):
            r = int(np.argmin(tab[:, -1]))
            if tab[r, -1] >= -1e-9:
                return True
            reduced = costs[:total] - costs[basis] @ tab[:, :total]
            nonbasic = np.ones(total, dtype=bool)
            nonbasic[basis] = False
            eligible = np.where(allowed & nonbasic & (tab[r, :total] < -pivot_eps))[0]
            if eligible.size == 0:
                return False
            ratios = np.maximum(reduced[eligible], 0.0) / -tab[r, eligible]
            pivot(r, int(eligible[np.argmin(ratios)]))
            iterations += 1
        return False

    def run_phase(costs: np.ndarray, allowed: np.ndarray) -> str:
        # Dantzig pricing for speed; a degenerate stall flips to Bland's
        # lowest-index rule, whose anti-cycling guarantee unsticks the basis
        nonlocal iterations
        stall = 0
        last_obj = None
        since_refactor = 0
        while True:
            if iterations >= max_iter:
                raise LpError(
                    f"simplex iteration cap {max_iter} reached", iterations=iterations
                )
            if since_refactor >= _REFACTOR_EVERY:
                refactorize()
                since_refactor = 0
            obj_now = float(costs[basis] @ tab[:, -1])
            if last_obj is not None and obj_now < last_obj - 1e-12:
                stall = 0
            else:
                stall += 1
            last_obj = obj_now
            reduced = costs[:total] - costs[basis] @ tab[:, :total]
            # drift can give an already-basic column a slightly negative
            # reduced cost; letting it re-enter would duplicate a basis column
            nonbasic = np.ones(total, dtype=bool)
            nonbasic[basis] = False
            candidates = np.where(allowed & nonbasic & (reduced < -_COST_EPS))[0]
            if candidates.size == 0:
                return "optimal"
            if stall >= _STALL_LIMIT:
                col = int(candidates[0])  # Bland: lowest index enters
            else:
                col = int(candidates[np.argmin(reduced[candidates])])
            ratios = np.full(m, np.inf)
            positive = tab[:, col] > pivot_eps
            # refactorization can leave basics a hair below zero; rate them
            # as exactly binding rather than producing negative ratios
            ratios[positive] = np.maximum(tab[positive, -1], 0.0) / tab[positive, col]
            if not np.isfinite(ratios).any():
                return "unbounded"
            best = ratios.min()
            ties = np.where(ratios <= best + _RATIO_TIE)[0]
            # keep the tie-break away from numerically fragile pivots;
            # dividing by a near-zero element wrecks the tableau
            pivots = np.abs(tab[ties, col])
            sturdy = ties[pivots >= max(pivot_eps, 1e-4 * pivots.max())]
            if stall >= _STALL_LIMIT:
                row = int(sturdy[np.argmin(basis[sturdy])])  # Bland: lowest basis leaves
            else:
                row = int(sturdy[np.argmax(np.abs(tab[sturdy, col]))])
            pivot(row, col)
            since_refactor += 1
            iterations += 1

    if n_art:
        phase1_costs = np.zeros(total)
        phase1_costs[n + m:] = 1.0
        allowed = np.ones(total, dtype=bool)
        status = run_phase(phase1_costs, allowed)
        if status != "optimal":
            raise LpError("phase 1 terminated abnormally", iterations=iterations)
        refactorize()
        resid = float(phase1_costs[basis] @ tab[:, -1])
        if resid > _FEAS_EPS:
            return LpResult("infeasible", None, None, iterations)
        # excise the artificials: pivot each one out, or drop its row as
        # redundant; a basic artificial left at zero could later be pushed
        # positive, silently breaking the original constraints
        drop_rows = []
        for row in range(m):
            if basis[row] >= n + m:
                eligible = np.abs(tab[row, : n + m]) > pivot_eps
                eligible[basis[basis < n + m]] = False
                cols = np.where(eligible)[0]
                if cols.size:
                    pivot(row, int(cols[0]))
                    iterations += 1
                else:
                    drop_rows.append(row)
        keep = np.array([r for r in range(m) if r not in drop_rows], dtype=int)
        full = np.hstack([full[keep][:, : n + m_full], full[keep][:, -1:]])
        tab = np.hstack([tab[keep][:, : n + m_full], tab[keep][:, -1:]])
        basis = basis[keep]
        row_ids = row_ids[keep]
        m = len(keep)
        total = n + m_full  # slack indexing is unchanged; artificials are gone

    phase2_costs = np.zeros(total)
    phase2_costs[:n] = c
    allowed = np.ones(total, dtype=bool)
    status = run_phase(phase2_costs, allowed)
    if status == "unbounded":
        return LpResult("unbounded", None, None, iterations)

    # stabilize on the perturbed (tie-free) system first
    for attempt in range(6):
        refactorize()
        if not dual_steps(phase2_costs, allowed):
            return LpResult("infeasible", None, None, iterations)
        reduced = phase2_costs[:total] - phase2_costs[basis] @ tab[:, :total]
        nonbasic = np.ones(total, dtype=bool)
        nonbasic[basis] = False
        clean = (
            float(tab[:, -1].min(initial=0.0)) >= -_FEAS_EPS
            and not np.any(allowed & nonbasic & (reduced < -10 * _COST_EPS))
        )
        if clean:
            break
        status = run_phase(phase2_costs, allowed)
        if status == "unbounded":
            return LpResult("unbounded", None, None, iterations)
    else:
        raise LpError("could not stabilize an optimal basis", iterations=iterations)

    # swap the true right-hand side back in; reduced costs do not involve b,
    # so dual steps alone restore feasibility at the true optimum
    full[:, -1] = b[row_ids]
    refactorize()
    if not dual_steps(phase2_costs, allowed):
        return LpResult("infeasible", None, None, iterations)

    x = np.zeros(total)
    x[basis] = tab[:, -1]
    solution = x[:n]
    residual = float((a_orig @ solution - b_orig).max(initial=0.0))
    if residual > 1e-6 or solution.min(initial=0.0) < -1e-6:
        raise LpError(
            f"solution drifted out of feasibility (residual {residual:.3e})",
            iterations=iterations,
        )
    return LpResult("optimal", solution, float(c @ solution), iterations)
