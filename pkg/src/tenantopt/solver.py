"""MILP backends (HiGHS by default, scipy's HiGHS wrapper as fallback) and a feasibility verifier."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .milp import MilpModel

log = logging.getLogger(__name__)

SOLVER_ENV_VAR = "TENANTOPT_SOLVER"
BACKENDS = ("highs", "scipy")

OPTIMAL = "optimal"
FEASIBLE_WITHIN_GAP = "feasibleWithinGap"
INFEASIBLE = "infeasible"
TIME_LIMIT = "timeLimit"


class BackendUnavailableError(RuntimeError):
    pass


class ModelUnboundedError(RuntimeError):
    """The objective is unbounded; some capacity lacks an upper bound."""


@dataclass(frozen=True)
class SolveOptions:
    relative_gap: float = 1e-4
    time_limit: float = 172800.0
    threads: int = 1
    seed: int = 0
    backend: str | None = None
    # re-solve the LP with integers fixed to their rounded values
    polish: bool = True
    verbose: bool = False

    def __post_init__(self):
        if self.relative_gap < 0:
            raise ValueError("relative_gap must be >= 0")
        if not self.time_limit > 0:
            raise ValueError("time_limit must be > 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class Solution:
    status: str
    objective_value: float
    x: np.ndarray
    gap: float = 0.0
    solver_objective: float = float("nan")
    # best proven upper bound on the (maximised) objective
    bound: float = float("nan")
    runtime: float = 0.0
    backend: str = ""
    names: list[str] | None = field(default=None, repr=False)

    @property
    def has_values(self) -> bool:
        return self.status != INFEASIBLE

    @property
    def variable_values(self) -> dict[str, float]:
        if self.names is None:
            raise ValueError("solution carries no variable names")
        return dict(zip(self.names, self.x.tolist()))

    def value(self, idx) -> np.ndarray | float:
        out = self.x[np.asarray(idx)]
        return float(out) if np.ndim(out) == 0 else out


def backend_name(opts: SolveOptions) -> str:
    name = (opts.backend or os.environ.get(SOLVER_ENV_VAR) or "highs").lower()
    if name not in BACKENDS:
        raise BackendUnavailableError(f"unknown solver backend {name!r}; choose from {BACKENDS}")
    return name


def solve(model: MilpModel, opts: SolveOptions | None = None) -> Solution:
    """Maximise ``model``; the reported objective is recomputed from the variable values."""
    opts = opts or SolveOptions()
    name = backend_name(opts)
    t0 = time.perf_counter()
    if model.num_vars == 0:
        const = model.objective_constant
        return Solution(OPTIMAL, const, np.zeros(0), 0.0, const, const, 0.0, name, [])
    issues = model.audit()
    if issues:
        raise ValueError("model failed audit: " + "; ".join(f"{i.where}: {i.message}" for i in issues[:5]))
    if name == "highs":
        status, x, gap, obj, bound = _solve_highs(model, opts)
    else:
        status, x, gap, obj, bound = _solve_scipy(model, opts)
    if x is not None and opts.polish and status != INFEASIBLE and model.integrality.any():
        polished = _polish(model, x, opts)
        if polished is not None:
            x = polished
    sol = Solution(
        status=status,
        objective_value=model.evaluate(x) if x is not None else float("nan"),
        x=x if x is not None else np.zeros(0),
        gap=gap,
        solver_objective=obj,
        bound=bound,
        runtime=time.perf_counter() - t0,
        backend=name,
        names=model.var_names(),
    )
    log.debug("solved %s: %s obj=%.6g gap=%.2g in %.1fs", model.name, status, sol.objective_value, gap, sol.runtime)
    return sol


def _import_highspy():
    try:
        import highspy
    except ImportError as exc:  # pragma: no cover - highspy is a declared dependency
        raise BackendUnavailableError("highspy is not installed") from exc
    return highspy


def _highs_instance(model: MilpModel, opts: SolveOptions, lb=None, ub=None, integer=True):
    highspy = _import_highspy()
    h = highspy.Highs()
    h.setOptionValue("output_flag", bool(opts.verbose))
    h.setOptionValue("threads", int(opts.threads))
    h.setOptionValue("random_seed", int(opts.seed))
    h.setOptionValue("mip_rel_gap", float(opts.relative_gap))
    h.setOptionValue("time_limit", float(opts.time_limit))
    h.setOptionValue("mip_feasibility_tolerance", 1e-7)
    h.setOptionValue("primal_feasibility_tolerance", 1e-8)
    mat = model.matrix().tocsc()
    lp = highspy.HighsLp()
    lp.num_col_ = model.num_vars
    lp.num_row_ = model.num_cons
    lp.col_cost_ = model.objective.astype(float)
    lp.col_lower_ = (model.lb if lb is None else lb).astype(float)
    lp.col_upper_ = (model.ub if ub is None else ub).astype(float)
    lp.row_lower_ = model.row_lo.astype(float)
    lp.row_upper_ = model.row_hi.astype(float)
    lp.offset_ = float(model.objective_constant)
    lp.sense_ = highspy.ObjSense.kMaximize
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = mat.indptr.astype(np.int32)
    lp.a_matrix_.index_ = mat.indices.astype(np.int32)
    lp.a_matrix_.value_ = mat.data.astype(float)
    if integer and model.integrality.any():
        lp.integrality_ = [
            highspy.HighsVarType.kInteger if flag else highspy.HighsVarType.kContinuous for flag in model.integrality
        ]
    h.passModel(lp)
    return h, highspy


def _solve_highs(model: MilpModel, opts: SolveOptions):
    h, highspy = _highs_instance(model, opts)
    h.run()
    ms = h.getModelStatus()
    info = h.getInfo()
    S = highspy.HighsModelStatus
    has_sol = info.primal_solution_status == 2  # kSolutionStatusFeasible
    x = np.array(h.getSolution().col_value, dtype=float) if has_sol else None
    is_mip = bool(model.integrality.any())
    gap = float(info.mip_gap) if is_mip and has_sol else 0.0
    if not np.isfinite(gap):
        gap = float("inf")
    obj = float(info.objective_function_value) if has_sol else float("nan")
    bound = float(info.mip_dual_bound) if is_mip else obj
    if ms == S.kOptimal:
        status = OPTIMAL if gap <= 1e-9 else FEASIBLE_WITHIN_GAP
    elif ms == S.kInfeasible:
        return INFEASIBLE, None, float("inf"), float("nan"), float("nan")
    elif ms in (S.kUnbounded, S.kUnboundedOrInfeasible):
        if ms == S.kUnboundedOrInfeasible and _lp_relaxation_infeasible(model, opts):
            return INFEASIBLE, None, float("inf"), float("nan"), float("nan")
        raise ModelUnboundedError(f"model {model.name!r} is unbounded: a capacity is missing an upper bound")
    elif ms == S.kTimeLimit:
        status = TIME_LIMIT
    elif has_sol:
        status = FEASIBLE_WITHIN_GAP
    else:
        raise RuntimeError(f"HiGHS returned {h.modelStatusToString(ms)} without a solution")
    return status, x, gap, obj, bound


def _lp_relaxation_infeasible(model: MilpModel, opts: SolveOptions) -> bool:
    h, highspy = _highs_instance(model, opts, integer=False)
    h.setOptionValue("presolve", "off")
    h.run()
    return h.getModelStatus() == highspy.HighsModelStatus.kInfeasible


def _polish(model: MilpModel, x: np.ndarray, opts: SolveOptions) -> np.ndarray | None:
    """Fix integer variables at their rounded values and re-solve the remaining LP tightly."""
    ints = model.integrality
    lb = model.lb.copy()
    ub = model.ub.copy()
    fixed = np.round(x[ints])
    lb[ints] = fixed
    ub[ints] = fixed
    try:
        h, highspy = _highs_instance(model, opts, lb=lb, ub=ub, integer=False)
    except BackendUnavailableError:
        return None
    h.setOptionValue("primal_feasibility_tolerance", 1e-9)
    h.setOptionValue("dual_feasibility_tolerance", 1e-9)
    h.run()
    if h.getModelStatus() != highspy.HighsModelStatus.kOptimal:
        return None
    out = np.array(h.getSolution().col_value, dtype=float)
    out[ints] = fixed
    # keep the polished point only if it is at least as good
    if model.evaluate(out) + 1e-7 * max(1.0, abs(model.evaluate(x))) < model.evaluate(x):
        return None
    return out


def _solve_scipy(model: MilpModel, opts: SolveOptions):
    from scipy.optimize import Bounds, LinearConstraint, milp

    constraints = []
    if model.num_cons:
        constraints.append(LinearConstraint(model.matrix(), model.row_lo, model.row_hi))
    res = milp(
        c=-model.objective,
        constraints=constraints,
        integrality=model.integrality.astype(int),
        bounds=Bounds(model.lb, model.ub),
        options={
            "mip_rel_gap": opts.relative_gap,
            "time_limit": opts.time_limit,
            "disp": bool(opts.verbose),
            "presolve": True,
        },
    )
    if res.status == 2:
        return INFEASIBLE, None, float("inf"), float("nan"), float("nan")
    if res.status == 3:
        raise ModelUnboundedError(f"model {model.name!r} is unbounded: a capacity is missing an upper bound")
    if res.x is None:
        raise RuntimeError(f"scipy milp failed: {res.message}")
    gap = float(getattr(res, "mip_gap", 0.0) or 0.0)
    obj = -float(res.fun) + model.objective_constant
    dual = getattr(res, "mip_dual_bound", None)
    bound = -float(dual) + model.objective_constant if dual is not None else obj
    if res.status == 0:
        status = OPTIMAL if gap <= 1e-9 else FEASIBLE_WITHIN_GAP
    else:
        status = TIME_LIMIT
    return status, np.asarray(res.x, dtype=float), gap, obj, bound


# ---------------------------------------------------------------------------
# feasibility verification


@dataclass(frozen=True)
class FeasibilityViolation:
    name: str
    kind: str  # "row", "bound" or "integrality"
    amount: float


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[FeasibilityViolation, ...]
    max_violation: float

    @property
    def passed(self) -> bool:
        return not self.violations

    def names(self) -> list[str]:
        return [v.name for v in self.violations]

    def __str__(self) -> str:
        if self.passed:
            return f"feasible (max violation {self.max_violation:.3g})"
        head = ", ".join(f"{v.name} ({v.kind}, {v.amount:.3g})" for v in self.violations[:10])
        more = f" and {len(self.violations) - 10} more" if len(self.violations) > 10 else ""
        return f"{len(self.violations)} violations: {head}{more}"


def verify_feasibility(model: MilpModel, solution: Solution | np.ndarray, tol: float = 1e-6) -> FeasibilityReport:
    """Evaluate every bound, integrality mark and row; list those violated by more than ``tol``."""
    x = solution.x if isinstance(solution, Solution) else np.asarray(solution, dtype=float)
    if x.shape != (model.num_vars,):
        raise ValueError(f"expected {model.num_vars} values, got {x.shape}")
    found: list[FeasibilityViolation] = []
    worst = 0.0

    def collect(amounts: np.ndarray, kind: str, namer):
        nonlocal worst
        if amounts.size:
            worst = max(worst, float(amounts.max(initial=0.0)))
        for j in np.flatnonzero(amounts > tol):
            found.append(FeasibilityViolation(namer(int(j)), kind, float(amounts[j])))

    bound_gap = np.maximum(model.lb - x, x - model.ub)
    collect(np.maximum(bound_gap, 0.0), "bound", model.var_name)
    ints = np.flatnonzero(model.integrality)
    frac = np.zeros(model.num_vars)
    frac[ints] = np.abs(x[ints] - np.round(x[ints]))
    collect(frac, "integrality", model.var_name)
    if model.num_cons:
        act = model.row_activity(x)
        row_gap = np.maximum(model.row_lo - act, act - model.row_hi)
        collect(np.maximum(row_gap, 0.0), "row", model.con_name)
    found.sort(key=lambda v: -v.amount)
    return FeasibilityReport(tuple(found), worst)
