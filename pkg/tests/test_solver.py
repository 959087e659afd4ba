from __future__ import annotations

import itertools
from types import SimpleNamespace

import numpy as np
import pytest

from errors import ConfigMismatch, Infeasible, TimeLimitReached
from formulation.assemble import build_model
from formulation.milp import InstanceBuilder, MilpInstance, make_objective, make_row
from processors.fixtures import load_fixture
from services import solver as solver_module
from services.solver import BranchAndBound, SolverOptions, exit_code, solve, solve_lp_relaxation

BNB = SolverOptions(time_limit=60.0, engine="branch_and_bound")


def _knapsack(seed: int, n: int = 8, rows: int = 2) -> tuple[MilpInstance, np.ndarray, np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    weights = rng.integers(1, 20, size=(rows, n)).astype(float)
    caps = weights.sum(axis=1) * 0.45
    value = rng.integers(1, 30, size=n).astype(float)
    b = InstanceBuilder(f"knapsack-{seed}")
    names = [b.add_variable(f"x[{i}]", "binary") for i in range(n)]
    b.extend(
        make_row(f"cap[{r}]", list(zip(names, weights[r])), "<=", caps[r], "zone") for r in range(rows)
    )
    return b.build(make_objective("value", "max", list(zip(names, value)))), weights, caps, value


def _brute_force(weights: np.ndarray, caps: np.ndarray, value: np.ndarray) -> float:
    best = 0.0
    for pick in itertools.product((0.0, 1.0), repeat=len(value)):
        x = np.array(pick)
        if np.all(weights @ x <= caps + 1e-9):
            best = max(best, float(value @ x))
    return best


def _two_halves() -> MilpInstance:
    # LP optimum (1, 0.5) is fractional; integer optimum is 1
    b = InstanceBuilder("halves")
    b.add_variable("x[1]", "binary")
    b.add_variable("x[2]", "binary")
    b.extend([make_row("cap", {"x[1]": 2.0, "x[2]": 2.0}, "<=", 3.0, "zone")])
    return b.build(make_objective("count", "max", {"x[1]": 1.0, "x[2]": 1.0}))


# ---------- relaxation ----------

def test_single_binary() -> None:
    b = InstanceBuilder("one")
    b.add_variable("x[1]", "binary")
    inst = b.build(make_objective("x", "max", {"x[1]": 1.0}))
    sol = solve(inst, BNB)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(1.0)
    assert sol.value("x[1]") == pytest.approx(1.0)
    assert exit_code(sol) == 0


def test_infeasible_relaxation() -> None:
    b = InstanceBuilder("clash")
    b.add_variable("x[1]", "continuous", 0.0, 1.0)
    b.extend([make_row("floor", {"x[1]": 1.0}, ">=", 2.0, "zone")])
    inst = b.build(make_objective("x", "min", {"x[1]": 1.0}))
    with pytest.raises(Infeasible):
        solve_lp_relaxation(inst)
    sol = solve(inst, BNB)
    assert sol.status == "infeasible" and not sol.has_incumbent
    assert exit_code(sol) == 2
    with pytest.raises(Infeasible):
        sol.raise_for_status()


@pytest.mark.parametrize("seed", range(6))
def test_relaxation_matches_vertex_enumeration(seed: int) -> None:
    rng = np.random.default_rng(100 + seed)
    a = rng.uniform(0.5, 3.0, size=(3, 2))
    rhs = rng.uniform(4.0, 12.0, size=3)
    c = rng.uniform(-1.0, 2.0, size=2)

    b = InstanceBuilder("lp")
    b.add_variable("u[1]", "continuous", 0.0, 10.0)
    b.add_variable("u[2]", "continuous", 0.0, 10.0)
    b.extend(make_row(f"r[{r}]", {"u[1]": a[r, 0], "u[2]": a[r, 1]}, "<=", rhs[r], "zone") for r in range(3))
    inst = b.build(make_objective("lin", "max", {"u[1]": c[0], "u[2]": c[1]}, constant=3.0))

    lines = [(a[r], rhs[r]) for r in range(3)]
    lines += [(np.array([1.0, 0.0]), 0.0), (np.array([0.0, 1.0]), 0.0)]
    lines += [(np.array([1.0, 0.0]), 10.0), (np.array([0.0, 1.0]), 10.0)]
    best = -np.inf
    for (g1, h1), (g2, h2) in itertools.combinations(lines, 2):
        m = np.vstack([g1, g2])
        if abs(np.linalg.det(m)) < 1e-12:
            continue
        p = np.linalg.solve(m, [h1, h2])
        if np.all(p >= -1e-9) and np.all(p <= 10 + 1e-9) and np.all(a @ p <= rhs + 1e-9):
            best = max(best, float(c @ p))

    assert solve_lp_relaxation(inst).objective == pytest.approx(best + 3.0, abs=1e-6)


# ---------- branch and bound ----------

@pytest.mark.parametrize("seed", range(8))
def test_branch_and_bound_matches_brute_force(seed: int) -> None:
    inst, weights, caps, value = _knapsack(seed)
    sol = solve(inst, BNB)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(_brute_force(weights, caps, value))
    assert inst.check(sol.assignment) == []
    assert sol.bound == pytest.approx(sol.objective)


@pytest.mark.parametrize("branching", ["most_fractional", "first_index"])
def test_branching_rules_agree(branching: str) -> None:
    inst, weights, caps, value = _knapsack(42, n=10, rows=3)
    sol = solve(inst, SolverOptions(time_limit=60.0, branching=branching))
    assert sol.objective == pytest.approx(_brute_force(weights, caps, value))


def test_highs_engine_agrees() -> None:
    inst, weights, caps, value = _knapsack(3)
    sol = solve(inst, SolverOptions(time_limit=60.0, engine="highs"))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(_brute_force(weights, caps, value))


def test_worker_count_does_not_change_the_search() -> None:
    inst, *_ = _knapsack(11, n=12, rows=3)
    one = solve(inst, SolverOptions(time_limit=60.0, workers=1))
    many = solve(inst, SolverOptions(time_limit=60.0, workers=4))
    assert one.objective == many.objective
    assert one.assignment == many.assignment
    assert one.nodes == many.nodes


def test_node_limit_without_incumbent() -> None:
    sol = solve(_two_halves(), SolverOptions(node_limit=1))
    assert sol.status == "time_limit"
    assert not sol.has_incumbent
    assert sol.bound == pytest.approx(1.5)
    assert exit_code(sol) == 3
    with pytest.raises(TimeLimitReached) as err:
        sol.raise_for_status()
    assert err.value.incumbent is None


def test_node_limit_with_incumbent() -> None:
    sol = solve(_two_halves(), SolverOptions(node_limit=2))
    assert sol.status == "feasible"
    assert sol.objective == pytest.approx(1.0)
    assert sol.bound == pytest.approx(1.5)
    assert exit_code(sol) == 0
    assert sol.raise_for_status() is sol


def test_gap_tolerance_stops_early() -> None:
    sol = solve(_two_halves(), SolverOptions(absolute_gap=0.6))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(1.0)


def _almost_zero() -> MilpInstance:
    # the relaxation sits at b = 5e-7, inside the integrality tolerance, but b = 0 breaks the row
    b = InstanceBuilder("almost-zero")
    b.add_variable("b[1]", "binary")
    b.add_variable("x[1]", "continuous", 0.0, 10.0)
    b.extend([
        make_row("steep", {"b[1]": 1e6}, ">=", 0.5, "zone"),
        make_row("link", {"x[1]": 1.0, "b[1]": -1.0}, ">=", 0.0, "zone"),
    ])
    return b.build(make_objective("cost", "min", {"b[1]": 1.0, "x[1]": 1.0}))


def test_rounding_that_breaks_a_row_is_not_accepted() -> None:
    inst = _almost_zero()
    sol = solve(inst, BNB)
    assert sol.status == "optimal"
    assert sol.value("b[1]") == pytest.approx(1.0)
    assert sol.objective == pytest.approx(2.0)
    assert inst.check(sol.assignment) == []


@pytest.mark.parametrize(
    "kwargs",
    [{"time_limit": 0.0}, {"absolute_gap": -1.0}, {"branching": "random"}, {"engine": "cplex"},
     {"node_limit": 0}, {"workers": 0}],
)
def test_bad_options(kwargs) -> None:
    with pytest.raises(ConfigMismatch):
        SolverOptions(**kwargs)


def test_pulp_cross_check() -> None:
    pulp = pytest.importorskip("pulp")
    inst, weights, caps, value = _knapsack(5)
    prob = pulp.LpProblem("knapsack", pulp.LpMaximize)
    xs = [pulp.LpVariable(f"x{i}", cat="Binary") for i in range(len(value))]
    prob += pulp.lpSum(float(v) * x for v, x in zip(value, xs))
    for r in range(len(caps)):
        prob += pulp.lpSum(float(w) * x for w, x in zip(weights[r], xs)) <= float(caps[r])
    prob.solve(pulp.PULP_CBC_CMD(msg=False))
    assert solve(inst, BNB).objective == pytest.approx(pulp.value(prob.objective))


# ---------- timetabling instances ----------

def test_tiny8_cost_model(tiny8, fast_opts) -> None:
    cat, inst = build_model(tiny8.cfg, tiny8.topo, tiny8.od)
    sol = solve(inst, fast_opts)
    assert sol.status == "optimal"
    assert inst.check(sol.assignment) == []

    # every selected service is fed by a depot or by a turnaround
    selected = sum(sol.value(cat.tau(k)) for k in cat.all_services())
    pulled = sum(sol.value(n) for n in cat.names("alpha"))
    turned = sum(sol.value(n) for n in cat.names("y"))
    assert selected - pulled == pytest.approx(turned)
    assert sol.objective == pytest.approx(turned)

    highs = solve(inst, SolverOptions(time_limit=120.0, engine="highs"))
    assert highs.objective == pytest.approx(sol.objective)


def _enumerated_optimum(loaded) -> float:
    """Best objective over every service selection and zone choice, the rest solved with the zones pinned."""
    cat, inst = build_model(loaded.cfg, loaded.topo, loaded.od)
    highs = SolverOptions(time_limit=60.0, engine="highs")
    per_direction = []
    for direction in ("up", "down"):
        zones = cat.topo.zones(direction)
        choices = [zones if cat.previous(k) is None else [None, *zones] for k in cat.services(direction)]
        per_direction.append([dict(zip(cat.services(direction), pick)) for pick in itertools.product(*choices)])

    values = []
    for up, down in itertools.product(*per_direction):
        fixes = {}
        for k, zone in {**up, **down}.items():
            fixes[cat.tau(k)] = 0.0 if zone is None else 1.0
            for m, n in cat.topo.zones(cat.direction_of_service(k)):
                fixes[cat.z(k, m, n)] = 1.0 if zone == (m, n) else 0.0
        sol = solve(inst.fix(fixes), highs)
        if sol.status == "optimal":
            values.append(sol.objective)
    assert values
    return max(values) if inst.objective.sense == "max" else min(values)


def test_cost_model_matches_enumeration(tiny8, fast_opts) -> None:
    _, inst = build_model(tiny8.cfg, tiny8.topo, tiny8.od)
    sol = solve(inst, fast_opts)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(_enumerated_optimum(tiny8), abs=1e-6)


def test_quality_model_matches_enumeration(tiny8) -> None:
    quality = tiny8.with_model("2a")
    _, inst = build_model(quality.cfg, quality.topo, quality.od)
    sol = solve(inst, SolverOptions(time_limit=300.0, engine="highs"))
    assert sol.status == "optimal"
    assert inst.check(sol.assignment) == []
    assert sol.objective == pytest.approx(_enumerated_optimum(quality), rel=1e-6, abs=1e-6)


def test_wall_clock_limit_keeps_the_incumbent(monkeypatch) -> None:
    # the clock stands still until the first incumbent, then jumps past the limit
    clock = {"now": 0.0}
    monkeypatch.setattr(solver_module, "time", SimpleNamespace(perf_counter=lambda: clock["now"]))
    process = BranchAndBound._process

    def timed_process(self, node, out) -> None:
        process(self, node, out)
        if self.incumbent is not None:
            clock["now"] = 1e6

    monkeypatch.setattr(BranchAndBound, "_process", timed_process)
    sol = solve(_two_halves(), SolverOptions(time_limit=10.0, engine="branch_and_bound"))
    assert sol.status == "time_limit"
    assert sol.objective == pytest.approx(1.0)
    assert sol.bound == pytest.approx(1.5)
    assert exit_code(sol) == 3
    with pytest.raises(TimeLimitReached) as err:
        sol.raise_for_status()
    assert err.value.incumbent == pytest.approx(1.0)


def test_wall_clock_limit_on_a_full_size_line() -> None:
    loaded = load_fixture("santiago16")
    _, inst = build_model(loaded.cfg, loaded.topo, loaded.od)
    sol = solve(inst, SolverOptions(time_limit=2.0, engine="branch_and_bound"))
    assert sol.status == "time_limit"
    assert exit_code(sol) == 3
    if sol.has_incumbent:
        assert inst.check(sol.assignment) == []
        assert sol.bound is None or sol.bound <= sol.objective + 1e-6
