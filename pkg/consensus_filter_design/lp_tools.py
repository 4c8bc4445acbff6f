"""Dense revised simplex for the small design LPs.

Problems are given as

    minimise    c^T x
    subject to  A x <= b
                x_j >= 0 unless free[j]

Tall problems (more rows than variables, as every minimax design is) are
solved through their dual, which has one equality row per variable. Other
problems get a slack per row, with free variables split into positive and
negative parts. Either way the core works on

    minimise c^T z  subject to  M z = r,  z >= 0,  r >= 0

and recomputes the basic values and the multipliers from the basis columns
of M at every pivot, so rounding error never carries over between pivots.
Rows without a unit column start on an artificial variable and go through
phase 1.

Pivoting uses Dantzig's rule (most negative reduced cost, lowest index on
ties) and switches to Bland's rule for the rest of the solve once a run of
degenerate pivots suggests cycling. Ratio-test ties leave by the lowest basic
variable index. The same problem therefore always yields the same solution.
"""
import numpy as np

from consensus_filter_design.errors import LpError
from consensus_filter_design.logger import log

# Direction entries at or below this are not pivoted on.
PIVOT_TOL = 1e-9
# Reduced costs above -COST_TOL (relative to the largest cost) count as optimal.
COST_TOL = 1e-11
# Hard cap on pivots across both phases.
MAX_PIVOTS = 10000
# Consecutive degenerate pivots tolerated before Bland's rule takes over.
DEGENERATE_RUN = 50
# Relative optimality residual above which a solution is rejected.
RESIDUAL_TOL = 1e-9

class Form(object):
    """Which problem the simplex is run on."""
    auto = 'auto'
    primal = 'primal'
    dual = 'dual'
    all = (auto, primal, dual)

class LpProblem(object):
    """Inequality-form LP.

    Args:
        c (array): objective, length n.
        a_ub (array): constraint matrix, m x n.
        b_ub (array): right-hand sides, length m.
        free (array of bool): variables without a sign constraint.
    """

    def __init__(self, c, a_ub, b_ub, free=None):
        self.c = np.asarray(c, dtype=float)
        self.a_ub = np.atleast_2d(np.asarray(a_ub, dtype=float))
        self.b_ub = np.asarray(b_ub, dtype=float)
        n = len(self.c)
        self.free = np.zeros(n, dtype=bool) if free is None else np.asarray(free, dtype=bool)
        if self.a_ub.shape != (len(self.b_ub), n) or len(self.free) != n:
            raise LpError('Inconsistent LP dimensions: c {}, A {}, b {}'.format(
                self.c.shape, self.a_ub.shape, self.b_ub.shape))

    @property
    def shape(self):
        return self.a_ub.shape

class LpSolution(object):
    """Optimal basic solution.

    Attributes:
        x (array): primal solution in the original variables.
        objective (float): c^T x.
        duals (array): multipliers y <= 0 of the inequality rows.
        pivots (int): pivots performed.
        residual (float): largest relative violation of primal feasibility,
        dual feasibility, the duality gap and complementary slackness.
        form (str): primal or dual, the problem the simplex ran on.
    """

    def __init__(self, x, objective, duals, pivots, residual, form):
        self.x = x
        self.objective = objective
        self.duals = duals
        self.pivots = pivots
        self.residual = residual
        self.form = form

class _Unbounded(Exception):
    pass

class _Infeasible(Exception):
    pass

class _RevisedSimplex(object):
    """Basis bookkeeping for min c^T z, M z = r, z >= 0 with r >= 0."""

    def __init__(self, matrix, rhs):
        self.matrix = np.array(matrix, dtype=float)
        self.rhs = np.array(rhs, dtype=float)
        self.real = self.matrix.shape[1]
        self.kept = np.arange(self.matrix.shape[0])
        self.basis = self._starting_basis()
        self.pivots = 0
        self.degenerate_run = 0
        self.bland = False

    def _starting_basis(self):
        """Unit columns where the rows have one, artificials elsewhere."""
        m, n = self.matrix.shape
        nonzero = self.matrix != 0.0
        unit = (nonzero.sum(axis=0) == 1) & np.any(self.matrix == 1.0, axis=0)
        basis = np.full(m, -1, dtype=np.int64)
        for j in np.flatnonzero(unit):
            i = int(np.flatnonzero(nonzero[:, j])[0])
            if basis[i] < 0:
                basis[i] = j
        missing = np.flatnonzero(basis < 0)
        if len(missing):
            extra = np.zeros((m, len(missing)))
            extra[missing, np.arange(len(missing))] = 1.0
            self.matrix = np.hstack((self.matrix, extra))
            basis[missing] = n + np.arange(len(missing))
        return basis

    @property
    def artificial_count(self):
        return self.matrix.shape[1] - self.real

    def _basis_matrix(self):
        return self.matrix[:, self.basis]

    def _factor(self, cost):
        b = self._basis_matrix()
        try:
            values = np.linalg.solve(b, self.rhs)
            y = np.linalg.solve(b.T, cost[self.basis])
        except np.linalg.LinAlgError as err:
            raise LpError('Singular simplex basis after {} pivots'.format(self.pivots)) from err
        return b, values, y

    def run(self, cost, phase):
        """Pivot to optimality over the real columns.

        Returns:
            (basic values, multipliers) at the optimal basis.
        """
        allowed = np.zeros(self.matrix.shape[1], dtype=bool)
        allowed[:self.real] = True
        scale = max(1.0, float(np.max(np.abs(cost))))
        while True:
            b, values, y = self._factor(cost)
            reduced = cost - self.matrix.T @ y
            reduced[self.basis] = 0.0
            candidates = np.flatnonzero(allowed & (reduced < -COST_TOL*scale))
            if len(candidates) == 0:
                return values, y
            if self.bland:
                col = int(candidates[0])
            else:
                col = int(candidates[np.argmin(reduced[candidates])])
            direction = np.linalg.solve(b, self.matrix[:, col])
            rows = np.flatnonzero(direction > PIVOT_TOL)
            if len(rows) == 0:
                raise _Unbounded(phase, col)
            ratios = np.maximum(values[rows], 0.0)/direction[rows]
            best = ratios.min()
            tied = rows[ratios <= best + 1e-12*max(1.0, best)]
            row = int(tied[np.argmin(self.basis[tied])])
            if best <= 1e-12:
                self.degenerate_run += 1
                if self.degenerate_run >= DEGENERATE_RUN and not self.bland:
                    log.debug('Switching to Bland\'s rule after {} degenerate pivots'.format(
                        self.degenerate_run))
                    self.bland = True
            else:
                self.degenerate_run = 0
            if self.pivots >= MAX_PIVOTS:
                raise LpError('Simplex stalled: {} pivots without reaching optimality '
                              '(phase {})'.format(self.pivots, phase))
            self.basis[row] = col
            self.pivots += 1

    def _drive_out_artificials(self):
        """Swap zero-valued artificials for real columns; drop redundant rows."""
        k = 0
        while k < len(self.basis):
            if self.basis[k] < self.real:
                k += 1
                continue
            unit = np.zeros(len(self.basis))
            unit[k] = 1.0
            row = np.linalg.solve(self._basis_matrix().T, unit) @ self.matrix[:, :self.real]
            row[self.basis[self.basis < self.real]] = 0.0
            candidates = np.flatnonzero(np.abs(row) > PIVOT_TOL)
            if len(candidates):
                self.basis[k] = int(candidates[0])
                k += 1
                continue
            i = int(np.flatnonzero(self.matrix[:, self.basis[k]])[0])
            log.debug('Dropping redundant row {} after phase 1'.format(self.kept[i]))
            self.matrix = np.delete(self.matrix, i, axis=0)
            self.rhs = np.delete(self.rhs, i)
            self.kept = np.delete(self.kept, i)
            self.basis = np.delete(self.basis, k)

    def solve(self, cost):
        """Two-phase solve.

        Returns:
            (z, y): optimal values of the real columns and the multipliers of
            the original rows (zero on rows dropped as redundant).
        """
        rows = len(self.kept)
        if self.artificial_count:
            phase_one = np.zeros(self.matrix.shape[1])
            phase_one[self.real:] = 1.0
            values, _ = self.run(phase_one, phase=1)
            infeasibility = float(np.sum(values[self.basis >= self.real]))
            if infeasibility > 1e-9*max(1.0, float(np.max(np.abs(self.rhs)))):
                raise _Infeasible(infeasibility)
            self._drive_out_artificials()
            self.degenerate_run = 0
        full_cost = np.concatenate((cost, np.zeros(self.artificial_count)))
        values, y = self.run(full_cost, phase=2)
        z = np.zeros(self.real)
        real = self.basis < self.real
        z[self.basis[real]] = values[real]
        multipliers = np.zeros(rows)
        multipliers[self.kept] = y
        return z, multipliers

def _solve_primal(problem):
    """Slack per row, free variables split."""
    columns, costs, origin = [], [], []
    for j in range(len(problem.c)):
        columns.append(problem.a_ub[:, j])
        costs.append(problem.c[j])
        origin.append((j, 1.0))
        if problem.free[j]:
            columns.append(-problem.a_ub[:, j])
            costs.append(-problem.c[j])
            origin.append((j, -1.0))
    a = np.column_stack(columns)
    m = a.shape[0]
    sign = np.where(problem.b_ub < 0, -1.0, 1.0)
    core = _RevisedSimplex(np.hstack((sign[:, None]*a, np.diag(sign))), sign*problem.b_ub)
    try:
        z, y = core.solve(np.concatenate((costs, np.zeros(m))))
    except _Infeasible as err:
        raise LpError('LP is infeasible (phase 1 optimum {:.3e})'.format(err.args[0])) from err
    except _Unbounded as err:
        raise LpError('LP is unbounded (phase {}, column {})'.format(*err.args)) from err
    x = np.zeros(len(problem.c))
    for k, (j, direction) in enumerate(origin):
        x[j] += direction*z[k]
    return x, sign*y, core.pivots

def _solve_dual(problem):
    """Equality row per variable: -A^T u (+ t on signed variables) = c, u, t >= 0.

    The optimal u gives the row multipliers y = -u, and the multipliers w of
    the dual's rows give x = -sign*w.
    """
    a, c = problem.a_ub, problem.c
    m, n = a.shape
    signed = np.flatnonzero(~problem.free)
    slack = np.zeros((n, len(signed)))
    slack[signed, np.arange(len(signed))] = 1.0
    sign = np.where(c < 0, -1.0, 1.0)
    core = _RevisedSimplex(sign[:, None]*np.hstack((-a.T, slack)), sign*c)
    try:
        z, w = core.solve(np.concatenate((problem.b_ub, np.zeros(len(signed)))))
    except _Unbounded as err:
        raise LpError('LP is infeasible (its dual is unbounded)') from err
    except _Infeasible as err:
        raise LpError('LP is unbounded or infeasible (its dual is infeasible)') from err
    return -sign*w, -z[:m], core.pivots

def _largest(values):
    return max(0.0, float(np.max(values))) if len(values) else 0.0

def optimality_residual(problem, x, duals):
    """Largest relative violation of the optimality conditions at (x, y)."""
    a, b, c = problem.a_ub, problem.b_ub, problem.c
    signed = ~problem.free
    slack = b - a @ x
    reduced = c - a.T @ duals
    violation = max(
        _largest(-slack),
        _largest(-x[signed]),
        _largest(duals),
        _largest(np.abs(reduced[problem.free])),
        _largest(-reduced[signed]),
        abs(float(np.dot(c, x)) - float(np.dot(b, duals))),
        _largest(np.abs(duals*slack)),
        )
    scale = max(1.0, _largest(np.abs(c)), _largest(np.abs(b)))
    return violation/scale

def solve_lp(problem, form=Form.auto):
    """Solve an inequality-form LP to an optimal basic solution.

    Args:
        problem (LpProblem): the LP.
        form (str): auto runs the simplex on the dual when the problem has
            more rows than variables.

    Returns:
        LpSolution

    Raises:
        LpError: infeasible, unbounded, no optimum within MAX_PIVOTS, or a
            solution that fails the optimality check.
    """
    if form not in Form.all:
        raise LpError('Unknown LP form {!r}'.format(form))
    m, n = problem.shape
    if form == Form.auto:
        form = Form.dual if m > n else Form.primal
    if form == Form.dual:
        x, duals, pivots = _solve_dual(problem)
    else:
        x, duals, pivots = _solve_primal(problem)
    residual = optimality_residual(problem, x, duals)
    if residual > RESIDUAL_TOL:
        raise LpError('LP solution failed the optimality check: residual {:.3e} > {:.0e} '
                      '({} form, {} pivots)'.format(residual, RESIDUAL_TOL, form, pivots))
    objective = float(np.dot(problem.c, x))
    log.debug('LP {}x{} solved on the {} in {} pivots, objective {:.12g}'.format(
        m, n, form, pivots, objective))
    return LpSolution(x, objective, duals, pivots, residual, form)
