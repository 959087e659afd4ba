# services/solver.py
from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from errors import ConfigMismatch, Infeasible, NumericalFailure, TimeLimitReached
from formulation.milp import MilpInstance
from settings import Settings

log = logging.getLogger(__name__)

INTEGRALITY_TOL = 1e-6
FEASIBILITY_TOL = 1e-6
_IMPROVE_TOL = 1e-9
_CONDITION_MAX_COLS = 2000

STATUSES = ("optimal", "feasible", "infeasible", "time_limit")
ENGINES = ("branch_and_bound", "highs")
BRANCHING = ("most_fractional", "first_index")


@dataclass(frozen=True)
class SolverOptions:
    time_limit: float = 14400.0
    absolute_gap: float = 0.0
    branching: str = "most_fractional"
    node_limit: Optional[int] = None
    engine: str = "branch_and_bound"
    workers: int = 1
    node_batch: int = 4             # nodes popped per round; fixed so results ignore `workers`

    def __post_init__(self) -> None:
        if self.time_limit <= 0:
            raise ConfigMismatch("time_limit must be positive")
        if self.absolute_gap < 0:
            raise ConfigMismatch("absolute_gap must be non-negative")
        if self.branching not in BRANCHING:
            raise ConfigMismatch(f"branching must be one of {BRANCHING}")
        if self.engine not in ENGINES:
            raise ConfigMismatch(f"engine must be one of {ENGINES}")
        if self.node_limit is not None and self.node_limit < 1:
            raise ConfigMismatch("node_limit must be at least 1")
        if self.workers < 1 or self.node_batch < 1:
            raise ConfigMismatch("workers and node_batch must be at least 1")

    @classmethod
    def from_settings(cls, s: Settings) -> "SolverOptions":
        return cls(
            time_limit=s.time_limit,
            absolute_gap=s.absolute_gap,
            branching=s.branching,
            node_limit=s.node_limit,
            engine=s.engine,
            workers=s.workers,
            node_batch=s.node_batch,
        )


@dataclass
class MilpSolution:
    status: str                                   # optimal | feasible | infeasible | time_limit
    objective: Optional[float]                    # None without an incumbent
    assignment: dict[str, float] = field(default_factory=dict)
    bound: Optional[float] = None                 # best dual bound, instance sense
    wall_time: float = 0.0                        # s
    nodes: int = 0
    instance_name: str = ""

    @property
    def has_incumbent(self) -> bool:
        return self.objective is not None

    def raise_for_status(self) -> "MilpSolution":
        if self.status == "infeasible":
            raise Infeasible(f"{self.instance_name or 'instance'} is infeasible")
        if self.status == "time_limit":
            raise TimeLimitReached(
                f"{self.instance_name or 'instance'} hit the solver limit after {self.wall_time:.1f}s",
                incumbent=self.objective,
            )
        return self

    def value(self, name: str) -> float:
        return self.assignment.get(name, 0.0)


def exit_code(solution: MilpSolution) -> int:
    return {"optimal": 0, "feasible": 0, "infeasible": 2, "time_limit": 3}[solution.status]


@dataclass(frozen=True)
class LpResult:
    objective: float                              # instance sense, constant included
    point: dict[str, float]


# ---------- matrix form ----------

@dataclass(frozen=True)
class _MatrixForm:
    names: tuple[str, ...]
    c: np.ndarray                                 # minimization form
    constant: float
    sign: float                                   # +1 min, -1 max
    a_ub: Optional[sparse.csr_matrix]
    b_ub: Optional[np.ndarray]
    a_eq: Optional[sparse.csr_matrix]
    b_eq: Optional[np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    binaries: np.ndarray                          # column indices
    binary_names: tuple[str, ...]

    @classmethod
    def of(cls, instance: MilpInstance) -> "_MatrixForm":
        index = instance.index
        ncols = len(instance.variables)
        sign = 1.0 if instance.objective.sense == "min" else -1.0
        c = np.zeros(ncols)
        for v, coef in instance.objective.coefs:
            c[index[v]] += sign * coef

        ub_rows, ub_cols, ub_vals, b_ub = [], [], [], []
        eq_rows, eq_cols, eq_vals, b_eq = [], [], [], []
        for r in instance.rows:
            if r.sense == "=":
                pos = len(b_eq)
                for v, coef in r.coefs:
                    eq_rows.append(pos); eq_cols.append(index[v]); eq_vals.append(coef)
                b_eq.append(r.rhs)
            else:
                flip = 1.0 if r.sense == "<=" else -1.0
                pos = len(b_ub)
                for v, coef in r.coefs:
                    ub_rows.append(pos); ub_cols.append(index[v]); ub_vals.append(flip * coef)
                b_ub.append(flip * r.rhs)

        def _csr(rows, cols, vals, count):
            if not count:
                return None
            return sparse.csr_matrix((vals, (rows, cols)), shape=(count, ncols))

        binaries = np.array([index[n] for n in instance.binaries()], dtype=int)
        return cls(
            names=tuple(v.name for v in instance.variables),
            c=c,
            constant=instance.objective.constant,
            sign=sign,
            a_ub=_csr(ub_rows, ub_cols, ub_vals, len(b_ub)),
            b_ub=np.array(b_ub) if b_ub else None,
            a_eq=_csr(eq_rows, eq_cols, eq_vals, len(b_eq)),
            b_eq=np.array(b_eq) if b_eq else None,
            lower=np.array([v.lower for v in instance.variables], dtype=float),
            upper=np.array([v.upper for v in instance.variables], dtype=float),
            binaries=binaries,
            binary_names=tuple(instance.binaries()),
        )

    def to_instance_sense(self, value_min: float) -> float:
        return self.sign * value_min + self.constant

    def condition_estimate(self) -> Optional[float]:
        blocks = [m for m in (self.a_ub, self.a_eq) if m is not None]
        if not blocks or len(self.names) > _CONDITION_MAX_COLS:
            return None
        try:
            return float(np.linalg.cond(sparse.vstack(blocks).toarray()))
        except np.linalg.LinAlgError:
            return None


def _solve_lp(form: _MatrixForm, lower: np.ndarray, upper: np.ndarray) -> Optional[tuple[float, np.ndarray]]:
    """(min-form objective, x) or None when infeasible."""
    if np.any(lower > upper + FEASIBILITY_TOL):
        return None
    res = linprog(
        form.c,
        A_ub=form.a_ub,
        b_ub=form.b_ub,
        A_eq=form.a_eq,
        b_eq=form.b_eq,
        bounds=np.column_stack((lower, upper)),
        method="highs-ds",
    )
    if res.status == 2:
        return None
    if res.status != 0:
        raise NumericalFailure(res.status, res.message, form.condition_estimate())
    return float(res.fun), np.asarray(res.x, dtype=float)


def solve_lp_relaxation(instance: MilpInstance) -> LpResult:
    """Continuous relaxation of `instance` (binaries relaxed to [0, 1])."""
    form = _MatrixForm.of(instance)
    out = _solve_lp(form, form.lower, form.upper)
    if out is None:
        raise Infeasible(f"LP relaxation of {instance.name} is infeasible")
    fun, x = out
    return LpResult(form.to_instance_sense(fun), dict(zip(form.names, x.tolist())))


# ---------- branch and bound ----------

@dataclass
class _Node:
    lower: np.ndarray
    upper: np.ndarray
    depth: int


class BranchAndBound:
    """
    Best-first branch-and-bound over the binaries of one instance.

    Nodes are popped in rounds of `node_batch`; each round's LPs may run on
    several worker threads but their results are applied in pop order, so the
    search tree (and the answer) is the same for any worker count.
    """

    def __init__(self, instance: MilpInstance, opts: SolverOptions) -> None:
        self.instance = instance
        self.opts = opts
        self.form = _MatrixForm.of(instance)
        self._seq = itertools.count()
        self._heap: list[tuple[float, int, int, _Node]] = []
        self.incumbent: Optional[float] = None    # min form
        self.incumbent_x: Optional[np.ndarray] = None
        self.nodes = 0

    # ---------------- Internal helpers ----------------

    def _push(self, bound: float, node: _Node) -> None:
        heapq.heappush(self._heap, (bound, -node.depth, next(self._seq), node))

    def _can_improve(self, bound: float) -> bool:
        if self.incumbent is None:
            return True
        return bound < self.incumbent - self.opts.absolute_gap - _IMPROVE_TOL

    def _fractional(self, x: np.ndarray) -> list[int]:
        """Positions (into form.binaries) of binaries that are not integral."""
        vals = x[self.form.binaries]
        return [p for p, val in enumerate(vals) if abs(val - round(val)) > INTEGRALITY_TOL]

    def _pick_branch(self, x: np.ndarray, fractional: list[int]) -> int:
        if self.opts.branching == "first_index":
            return int(self.form.binaries[fractional[0]])
        names = self.form.binary_names

        def score(p: int) -> tuple[float, str]:
            f = x[self.form.binaries[p]] % 1.0
            return (-min(f, 1.0 - f), names[p])

        return int(self.form.binaries[min(fractional, key=score)])

    def _polish(self, node: _Node, x: np.ndarray) -> Optional[tuple[float, np.ndarray]]:
        """Re-solve with binaries pinned to their rounded values; None when that LP is infeasible."""
        lower, upper = node.lower.copy(), node.upper.copy()
        rounded = np.round(x[self.form.binaries])
        lower[self.form.binaries] = rounded
        upper[self.form.binaries] = rounded
        out = _solve_lp(self.form, lower, upper)
        if out is None:
            return None
        fun, px = out
        px[self.form.binaries] = rounded
        return fun, px

    def _least_integral_free(self, node: _Node, x: np.ndarray) -> Optional[int]:
        """Unfixed binary column farthest from its rounded value, if any."""
        free = [int(c) for c in self.form.binaries if node.lower[c] < node.upper[c]]
        if not free:
            return None
        return max(free, key=lambda c: (abs(x[c] - round(x[c])), -c))

    def _open_bound(self) -> Optional[float]:
        bounds = [item[0] for item in self._heap]
        if self.incumbent is not None:
            bounds.append(self.incumbent)
        return min(bounds) if bounds else None

    def _solution(self, status: str, started: float) -> MilpSolution:
        form = self.form
        objective = assignment = None
        if self.incumbent_x is not None:
            objective = form.to_instance_sense(self.incumbent)
            assignment = dict(zip(form.names, self.incumbent_x.tolist()))
        bound_min = self.incumbent if status == "optimal" else self._open_bound()
        return MilpSolution(
            status=status,
            objective=objective,
            assignment=assignment or {},
            bound=None if bound_min is None or not math.isfinite(bound_min) else form.to_instance_sense(bound_min),
            wall_time=time.perf_counter() - started,
            nodes=self.nodes,
            instance_name=self.instance.name,
        )

    # ---------------- Public API ----------------

    def run(self) -> MilpSolution:
        started = time.perf_counter()
        root = _Node(self.form.lower.copy(), self.form.upper.copy(), 0)
        self._push(-math.inf, root)
        pool = ThreadPoolExecutor(max_workers=self.opts.workers) if self.opts.workers > 1 else None
        try:
            while self._heap:
                if time.perf_counter() - started > self.opts.time_limit:
                    log.info("time limit reached after %d nodes", self.nodes)
                    return self._solution("time_limit", started)
                if self.opts.node_limit is not None and self.nodes >= self.opts.node_limit:
                    log.info("node limit reached after %d nodes", self.nodes)
                    return self._solution("feasible" if self.incumbent is not None else "time_limit", started)

                batch: list[tuple[float, _Node]] = []
                while self._heap and len(batch) < self.opts.node_batch:
                    bound, _, _, node = heapq.heappop(self._heap)
                    if self._can_improve(bound):
                        batch.append((bound, node))
                if not batch:
                    continue
                solve = lambda item: _solve_lp(self.form, item[1].lower, item[1].upper)
                results = list(pool.map(solve, batch)) if pool else [solve(item) for item in batch]
                for (_, node), out in zip(batch, results):
                    self.nodes += 1
                    self._process(node, out)
        finally:
            if pool:
                pool.shutdown(wait=True)

        status = "optimal" if self.incumbent is not None else "infeasible"
        solution = self._solution(status, started)
        log.info(
            "%s: %s after %d nodes in %.2fs (objective %s)",
            self.instance.name, status, self.nodes, solution.wall_time, solution.objective,
        )
        return solution

    def _process(self, node: _Node, out: Optional[tuple[float, np.ndarray]]) -> None:
        if out is None:
            return
        fun, x = out
        if not self._can_improve(fun):
            return
        fractional = self._fractional(x)
        if not fractional:
            polished = self._polish(node, x)
            if polished is not None:
                value, px = polished
                if self._can_improve(value):
                    self.incumbent, self.incumbent_x = value, px
                    log.debug("node %d: new incumbent %.6f at depth %d", self.nodes, value, node.depth)
                return
            # near-integral but the rounded point is infeasible: split on a free binary
            col = self._least_integral_free(node, x)
            if col is None:
                return
            log.debug("node %d: rounding infeasible, branching on %s", self.nodes, self.form.names[col])
        else:
            col = self._pick_branch(x, fractional)
        for fixed in (0.0, 1.0):
            lower, upper = node.lower.copy(), node.upper.copy()
            lower[col] = upper[col] = fixed
            self._push(fun, _Node(lower, upper, node.depth + 1))


# ---------- external engine ----------

def _solve_highs(instance: MilpInstance, opts: SolverOptions) -> MilpSolution:
    started = time.perf_counter()
    form = _MatrixForm.of(instance)
    constraints = []
    if form.a_ub is not None:
        constraints.append(LinearConstraint(form.a_ub, -np.inf, form.b_ub))
    if form.a_eq is not None:
        constraints.append(LinearConstraint(form.a_eq, form.b_eq, form.b_eq))
    integrality = np.zeros(len(form.names))
    integrality[form.binaries] = 1
    options = {"time_limit": opts.time_limit, "disp": False}
    if opts.node_limit is not None:
        options["node_limit"] = opts.node_limit
    res = milp(form.c, constraints=constraints, integrality=integrality,
               bounds=Bounds(form.lower, form.upper), options=options)

    x = None if res.x is None else np.asarray(res.x, dtype=float)
    if x is not None:
        x[form.binaries] = np.round(x[form.binaries])
    if res.status == 0:
        status = "optimal"
    elif res.status == 2:
        status = "infeasible"
    elif res.status == 1:
        status = "time_limit"
    else:
        raise NumericalFailure(res.status, res.message, form.condition_estimate())
    dual = getattr(res, "mip_dual_bound", None)
    return MilpSolution(
        status=status,
        objective=None if x is None else form.to_instance_sense(float(form.c @ x)),
        assignment={} if x is None else dict(zip(form.names, x.tolist())),
        bound=None if dual is None or not np.isfinite(dual) else form.to_instance_sense(float(dual)),
        wall_time=time.perf_counter() - started,
        instance_name=instance.name,
    )


def solve(instance: MilpInstance, opts: Optional[SolverOptions] = None) -> MilpSolution:
    opts = opts or SolverOptions()
    log.info(
        "solving %s with %s (%d binaries, time limit %.0fs)",
        instance.name, opts.engine, len(instance.binaries()), opts.time_limit,
    )
    if opts.engine == "highs":
        return _solve_highs(instance, opts)
    return BranchAndBound(instance, opts).run()


__all__ = [
    "SolverOptions",
    "MilpSolution",
    "LpResult",
    "BranchAndBound",
    "solve",
    "solve_lp_relaxation",
    "exit_code",
    "STATUSES",
    "ENGINES",
]
