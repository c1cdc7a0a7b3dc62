"""Solver-agnostic MILP container.

Variables and constraints are added in vectorised blocks. A block of variables
is addressed by an integer index array; a block of constraints is a set of rows
sharing a name prefix, so row ``k`` of block ``"heat_balance"`` is reported as
``heat_balance[k]``. The objective is always maximised.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

INF = math.inf

SENSES = ("<=", ">=", "==")


@dataclass
class Block:
    name: str
    start: int
    size: int
    shape: tuple[int, ...]

    @property
    def stop(self) -> int:
        return self.start + self.size


@dataclass(frozen=True)
class AuditIssue:
    where: str
    message: str


class MilpModel:
    """Maximisation MILP with named variable and constraint blocks."""

    def __init__(self, name: str = "model"):
        self.name = name
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self._int: list[np.ndarray] = []
        self.var_blocks: dict[str, Block] = {}
        self.tags: dict[str, str] = {}
        self.num_vars = 0

        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self._row_lo: list[np.ndarray] = []
        self._row_hi: list[np.ndarray] = []
        self.con_blocks: dict[str, Block] = {}
        self.num_cons = 0

        self._obj = np.zeros(0)
        self.objective_constant = 0.0

    # ------------------------------------------------------------------ vars

    def add_vars(
        self,
        name: str,
        shape: int | tuple[int, ...],
        lb: float | np.ndarray = 0.0,
        ub: float | np.ndarray = INF,
        binary: bool = False,
        tag: str = "flow",
    ) -> np.ndarray:
        """Declare a block of variables; returns their indices with the given shape."""
        if name in self.var_blocks:
            raise ValueError(f"duplicate variable block {name!r}")
        shape = (shape,) if isinstance(shape, (int, np.integer)) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        lo = np.broadcast_to(np.asarray(lb, dtype=float), shape).reshape(-1).copy()
        hi = np.broadcast_to(np.asarray(ub, dtype=float), shape).reshape(-1).copy()
        if binary:
            lo = np.maximum(lo, 0.0)
            hi = np.minimum(hi, 1.0)
        self._lb.append(lo)
        self._ub.append(hi)
        self._int.append(np.full(n, binary))
        self.var_blocks[name] = Block(name, self.num_vars, n, shape)
        self.tags[name] = "binary" if binary and tag == "flow" else tag
        idx = np.arange(self.num_vars, self.num_vars + n).reshape(shape)
        self.num_vars += n
        self._obj = np.concatenate([self._obj, np.zeros(n)])
        return idx

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF, binary: bool = False, tag: str = "flow") -> int:
        """Declare a single scalar variable; returns its index."""
        return int(self.add_vars(name, (), lb, ub, binary, tag))

    def var(self, name: str) -> np.ndarray:
        b = self.var_blocks[name]
        return np.arange(b.start, b.stop).reshape(b.shape)

    def var_name(self, j: int) -> str:
        for b in self.var_blocks.values():
            if b.start <= j < b.stop:
                return _element_name(b, j - b.start)
        raise IndexError(j)

    def var_names(self) -> list[str]:
        out = []
        for b in self.var_blocks.values():
            out.extend(_element_name(b, k) for k in range(b.size))
        return out

    def fix(self, idx, value) -> None:
        """Fix variables to a value by collapsing their bounds."""
        self._materialise()
        idx = np.atleast_1d(np.asarray(idx)).ravel()
        self._lb_all[idx] = value
        self._ub_all[idx] = value

    def set_bounds(self, idx, lb=None, ub=None) -> None:
        self._materialise()
        idx = np.atleast_1d(np.asarray(idx)).ravel()
        if lb is not None:
            self._lb_all[idx] = lb
        if ub is not None:
            self._ub_all[idx] = ub

    # ----------------------------------------------------------- constraints

    def add_constraints(self, name: str, terms, sense: str, rhs=0.0) -> np.ndarray:
        """Add rows  sum_k coef_k * x[idx_k]  (sense)  rhs.

        ``terms`` is a sequence of ``(coef, idx)`` pairs. ``idx`` is a scalar
        (the same variable in every row), an array of shape (m,) or an array of
        shape (m, n) whose second axis is summed within each row. ``coef``
        broadcasts against ``idx`` with numpy rules (pass ``c[:, None]`` for a
        per-row factor on a 2-D index). ``rhs`` broadcasts to (m,).
        Returns the row indices.
        """
        if sense not in SENSES:
            raise ValueError(f"sense must be one of {SENSES}, got {sense!r}")
        if name in self.con_blocks:
            raise ValueError(f"duplicate constraint block {name!r}")
        terms = [(np.asarray(c, dtype=float), np.asarray(i, dtype=np.int64)) for c, i in terms]
        sizes = {i.shape[0] for _, i in terms if i.ndim >= 1}
        sizes |= {c.shape[0] for c, i in terms if i.ndim == 0 and c.ndim == 1}
        if len(sizes) > 1:
            raise ValueError(f"{name}: inconsistent row counts {sorted(sizes)}")
        m = sizes.pop() if sizes else np.atleast_1d(np.asarray(rhs)).shape[0]
        r0 = self.num_cons
        for c, i in terms:
            if i.ndim == 0:
                i = np.full(m, int(i))
            c = np.broadcast_to(c, i.shape)
            rows = np.broadcast_to(np.arange(r0, r0 + m).reshape((m,) + (1,) * (i.ndim - 1)), i.shape)
            self._rows.append(rows.ravel())
            self._cols.append(i.ravel())
            self._vals.append(np.array(c, dtype=float).ravel())
        rhs_arr = np.broadcast_to(np.asarray(rhs, dtype=float), (m,))
        lo = rhs_arr.copy() if sense in (">=", "==") else np.full(m, -INF)
        hi = rhs_arr.copy() if sense in ("<=", "==") else np.full(m, INF)
        self._row_lo.append(lo)
        self._row_hi.append(hi)
        self.con_blocks[name] = Block(name, r0, m, (m,))
        self.num_cons += m
        return np.arange(r0, r0 + m)

    def add_constraint(self, name: str, idx, coef, sense: str, rhs: float) -> int:
        """Add one row  sum_j coef_j * x[idx_j]  (sense)  rhs  under a scalar name."""
        idx = np.atleast_1d(np.asarray(idx)).ravel()
        coef = np.broadcast_to(np.asarray(coef, dtype=float), idx.shape)
        rows = self.add_constraints(name, [(coef.reshape(1, -1), idx.reshape(1, -1))], sense, rhs)
        self.con_blocks[name].shape = ()
        return int(rows[0])

    def add_row(self, name: str, terms, sense: str, rhs: float) -> int:
        """Add one row from several ``(coef, idx)`` terms of any shape (all entries summed)."""
        idx_parts, coef_parts = [], []
        for c, i in terms:
            i = np.atleast_1d(np.asarray(i, dtype=np.int64))
            idx_parts.append(i.ravel())
            coef_parts.append(np.broadcast_to(np.asarray(c, dtype=float), i.shape).ravel())
        return self.add_constraint(name, np.concatenate(idx_parts), np.concatenate(coef_parts), sense, rhs)

    def con_name(self, r: int) -> str:
        for b in self.con_blocks.values():
            if b.start <= r < b.stop:
                return _element_name(b, r - b.start)
        raise IndexError(r)

    # ------------------------------------------------------------- objective

    def add_objective(self, idx, coef) -> None:
        """Accumulate objective coefficients (maximisation)."""
        idx = np.asarray(idx)
        np.add.at(self._obj, idx.ravel(), np.broadcast_to(np.asarray(coef, dtype=float), idx.shape).ravel())

    @property
    def objective(self) -> np.ndarray:
        return self._obj

    # ----------------------------------------------------------- assembled view

    def _materialise(self):
        # collapse the per-block bound arrays into one contiguous array each
        if len(self._lb) != 1:
            self._lb = [np.concatenate(self._lb) if self._lb else np.zeros(0)]
            self._ub = [np.concatenate(self._ub) if self._ub else np.zeros(0)]
        self._lb_all = self._lb[0]
        self._ub_all = self._ub[0]

    @property
    def lb(self) -> np.ndarray:
        self._materialise()
        return self._lb_all

    @property
    def ub(self) -> np.ndarray:
        self._materialise()
        return self._ub_all

    @property
    def integrality(self) -> np.ndarray:
        return np.concatenate(self._int) if self._int else np.zeros(0, dtype=bool)

    @property
    def row_lo(self) -> np.ndarray:
        return np.concatenate(self._row_lo) if self._row_lo else np.zeros(0)

    @property
    def row_hi(self) -> np.ndarray:
        return np.concatenate(self._row_hi) if self._row_hi else np.zeros(0)

    def matrix(self) -> sp.csr_matrix:
        """Constraint matrix with duplicate entries summed and explicit zeros dropped."""
        if not self._rows:
            return sp.csr_matrix((self.num_cons, self.num_vars))
        rows = np.concatenate(self._rows)
        cols = np.concatenate(self._cols)
        vals = np.concatenate(self._vals)
        mat = sp.coo_matrix((vals, (rows, cols)), shape=(self.num_cons, self.num_vars)).tocsr()
        mat.sum_duplicates()
        mat.eliminate_zeros()
        return mat

    # ------------------------------------------------------------ evaluation

    def evaluate(self, x: np.ndarray) -> float:
        """Objective value (constant included) of a full variable vector."""
        return float(self._obj @ np.asarray(x, dtype=float)) + self.objective_constant

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.matrix() @ np.asarray(x, dtype=float)

    def audit(self) -> list[AuditIssue]:
        """Static well-formedness checks; an empty list means the model is sound."""
        issues: list[AuditIssue] = []
        if self._rows:
            cols = np.concatenate(self._cols)
            vals = np.concatenate(self._vals)
            if cols.size and (cols.min() < 0 or cols.max() >= self.num_vars):
                issues.append(AuditIssue("matrix", "constraint references an undeclared variable"))
            if not np.all(np.isfinite(vals)):
                issues.append(AuditIssue("matrix", "non-finite constraint coefficient"))
        if not np.all(np.isfinite(self._obj)):
            issues.append(AuditIssue("objective", "non-finite objective coefficient"))
        if not math.isfinite(self.objective_constant):
            issues.append(AuditIssue("objective", "non-finite objective constant"))
        bad = np.flatnonzero(self.lb > self.ub)
        for j in bad[:10]:
            issues.append(AuditIssue(self.var_name(int(j)), "lower bound above upper bound"))
        lo, hi = self.row_lo, self.row_hi
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            issues.append(AuditIssue("rows", "NaN right-hand side"))
        for j in np.flatnonzero(lo > hi)[:10]:
            issues.append(AuditIssue(self.con_name(int(j)), "empty row range"))
        names = set()
        for b in list(self.var_blocks) + list(self.con_blocks):
            if b in names:
                issues.append(AuditIssue(b, "duplicate name"))
            names.add(b)
        return issues

    # --------------------------------------------------------------- export

    def write_lp(self, path: str | Path) -> Path:
        """Write the model in CPLEX LP text format."""
        path = Path(path)
        names = [_lp_name(n) for n in self.var_names()]
        mat = self.matrix().tocsr()
        lo, hi = self.row_lo, self.row_hi
        lines = [f"\\ {self.name}", "Maximize", " obj:"]
        lines += _wrap_expr(self._obj, np.arange(self.num_vars), names, constant=self.objective_constant)
        lines.append("Subject To")
        for r in range(self.num_cons):
            s, e = mat.indptr[r], mat.indptr[r + 1]
            expr = _wrap_expr(mat.data[s:e], mat.indices[s:e], names)
            rname = _lp_name(self.con_name(r))
            if lo[r] == hi[r]:
                rels = [("=", lo[r], rname)]
            else:
                rels = []
                if math.isfinite(lo[r]):
                    rels.append((">=", lo[r], rname if not math.isfinite(hi[r]) else rname + "_lo"))
                if math.isfinite(hi[r]):
                    rels.append(("<=", hi[r], rname if not math.isfinite(lo[r]) else rname + "_hi"))
            for rel, val, nm in rels:
                lines.append(f" {nm}:")
                lines += expr if expr else [f"  0 {names[0]}"]
                lines.append(f"  {rel} {_fmt(val)}")
        lines.append("Bounds")
        ints = self.integrality
        for j, nm in enumerate(names):
            lb, ub = self.lb[j], self.ub[j]
            if lb == ub:
                lines.append(f" {nm} = {_fmt(lb)}")
            elif math.isinf(ub) and lb == 0:
                continue
            else:
                lo_s = "-inf" if math.isinf(lb) else _fmt(lb)
                hi_s = "+inf" if math.isinf(ub) else _fmt(ub)
                lines.append(f" {lo_s} <= {nm} <= {hi_s}")
        bins = [names[j] for j in np.flatnonzero(ints) if self.lb[j] >= 0 and self.ub[j] <= 1]
        gens = [names[j] for j in np.flatnonzero(ints) if not (self.lb[j] >= 0 and self.ub[j] <= 1)]
        if bins:
            lines.append("Binaries")
            lines += [f" {n}" for n in bins]
        if gens:
            lines.append("Generals")
            lines += [f" {n}" for n in gens]
        lines.append("End")
        path.write_text("\n".join(lines) + "\n")
        return path


def _element_name(b: Block, k: int) -> str:
    if b.shape == ():
        return b.name
    if len(b.shape) == 1:
        return f"{b.name}[{k}]"
    return f"{b.name}[{','.join(str(int(i)) for i in np.unravel_index(k, b.shape))}]"


_LP_BAD = re.compile(r"[^A-Za-z0-9_.]")


def _lp_name(name: str) -> str:
    return _LP_BAD.sub("_", name.replace("[", "(").replace("]", ")").replace("(", "_").replace(")", ""))


def _fmt(v: float) -> str:
    return repr(float(v))


def _wrap_expr(coefs, idx, names, constant: float = 0.0) -> list[str]:
    parts = []
    for c, j in zip(coefs, idx):
        if c == 0:
            continue
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(c))} {names[j]}")
    if constant:
        sign = "-" if constant < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(constant))}")
    return ["  " + " ".join(parts[i : i + 6]) for i in range(0, len(parts), 6)]
