"""Mixed-integer linear models on a Pyomo ConcreteModel."""

from enum import Enum
import logging
import math
from numbers import Number
from typing import Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np
import pyomo.environ as pyo
from pyomo.common.collections import ComponentMap
from pyomo.core.expr.numvalue import NumericValue
from pyomo.repn import generate_standard_repn
from scipy import sparse

from ..base.error import ModelError

LOGGER = logging.getLogger(__name__)

Var = pyo.Var
Expression = Union[NumericValue, float]
Terms = List[Tuple[pyo.Var, float]]


class VarKind(str, Enum):
    """Variable domains."""

    CONTINUOUS = "continuous"
    BINARY = "binary"
    INTEGER = "integer"

    @property
    def domain(self):
        """Pyomo domain set."""
        return {
            VarKind.CONTINUOUS: pyo.Reals,
            VarKind.BINARY: pyo.Binary,
            VarKind.INTEGER: pyo.Integers,
        }[self]


class Sense(str, Enum):
    """Constraint senses, written as in LP files."""

    LE = "<="
    EQ = "="
    GE = ">="


class ObjectiveSense(str, Enum):
    """Optimization direction."""

    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"

    @property
    def pyomo(self):
        """Pyomo sense constant."""
        return pyo.maximize if self is ObjectiveSense.MAXIMIZE else pyo.minimize


class MatrixForm(NamedTuple):
    """Arrays for matrix-based solvers."""

    cost: np.ndarray
    offset: float
    matrix: sparse.csr_matrix
    row_lower: np.ndarray
    row_upper: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integrality: np.ndarray


def linear_terms(expr: Expression) -> Tuple[Terms, float]:
    """Coefficients and constant of an affine expression.

    Fixed variables are folded into the constant.
    """
    if isinstance(expr, Number):
        return [], float(expr)
    repn = generate_standard_repn(expr, quadratic=False)
    if not repn.is_linear():
        raise ModelError("quadratic terms are not supported")
    terms = [
        (var, float(coef))
        for var, coef in zip(repn.linear_vars, repn.linear_coefs)
        if coef != 0
    ]
    return terms, float(pyo.value(repn.constant))


def var_range(var: pyo.Var) -> Tuple[float, float]:
    """Bounds of a variable; a fixed variable spans its value."""
    if var.fixed:
        return float(var.value), float(var.value)
    lower, upper = var.bounds
    return (
        -math.inf if lower is None else float(lower),
        math.inf if upper is None else float(upper),
    )


class MilpModel:
    """Variables, rows and an objective on one Pyomo block; single writer."""

    def __init__(self, name: str = "model"):
        """Initialize an empty model."""
        self.name = name
        self.block = pyo.ConcreteModel(name=name)
        self.block.vars = pyo.Block()
        self.block.rows = pyo.Block()
        self.block.objective = pyo.Objective(expr=0.0)
        self.variables: List[pyo.Var] = []
        self.constraints: List[pyo.Constraint] = []
        self.objective_sense = ObjectiveSense.MINIMIZE

    def __repr__(self) -> str:
        return "<MilpModel {} vars={} rows={}>".format(
            self.name, len(self.variables), len(self.constraints)
        )

    @property
    def num_vars(self) -> int:
        """Variable count."""
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        """Row count."""
        return len(self.constraints)

    @property
    def objective(self) -> Expression:
        """Current objective expression."""
        return self.block.objective.expr

    @staticmethod
    def _declare(block: pyo.Block, name: str, component, what: str):
        if block.component(name) is not None:
            raise ModelError("Duplicate {} name {!r}".format(what, name))
        if hasattr(block, name):
            raise ModelError("Reserved {} name {!r}".format(what, name))
        block.add_component(name, component)

    def add_var(
        self,
        name: str,
        kind: Union[VarKind, str] = VarKind.CONTINUOUS,
        lower: float = 0.0,
        upper: float = math.inf,
    ) -> pyo.Var:
        """Add a variable; binaries are clipped to [0, 1]."""
        kind = VarKind(kind)
        lower, upper = float(lower), float(upper)
        if kind is VarKind.BINARY:
            lower, upper = max(lower, 0.0), min(upper, 1.0)
        if math.isnan(lower) or math.isnan(upper) or lower > upper:
            raise ModelError(
                "Invalid bounds [{}, {}] for variable {!r}".format(lower, upper, name)
            )
        var = pyo.Var(
            domain=kind.domain,
            bounds=(
                None if lower == -math.inf else lower,
                None if upper == math.inf else upper,
            ),
        )
        self._declare(self.block.vars, name, var, "variable")
        self.variables.append(var)
        return var

    def var(self, name: str) -> pyo.Var:
        """Variable by name."""
        var = self.block.vars.component(name)
        if var is None:
            raise ModelError("Unknown variable {!r}".format(name))
        return var

    def row(self, name: str) -> pyo.Constraint:
        """Constraint by name."""
        row = self.block.rows.component(name)
        if row is None:
            raise ModelError("Unknown constraint {!r}".format(name))
        return row

    def fix(self, var: pyo.Var, value: float):
        """Fix a variable to a value."""
        lower, upper = var_range(var)
        if not lower - 1e-9 <= value <= upper + 1e-9:
            raise ModelError(
                "Cannot fix {} to {} outside its bounds".format(var.local_name, value)
            )
        var.fix(float(value))

    def _owned_terms(self, expr: Expression, where: str) -> Tuple[Terms, float]:
        terms, constant = linear_terms(expr)
        for var, coef in terms:
            if var.parent_block() is not self.block.vars:
                raise ModelError("{} uses unknown variable {}".format(where, var.name))
            if not math.isfinite(coef):
                raise ModelError("Non-finite coefficient in {}".format(where))
        if not math.isfinite(constant):
            raise ModelError("Non-finite constant in {}".format(where))
        return terms, constant

    def add_constraint(
        self,
        expr: Expression,
        sense: Union[Sense, str],
        rhs: Expression = 0.0,
        name: Optional[str] = None,
    ) -> Optional[pyo.Constraint]:
        """Add ``expr sense rhs``; constants move to the right-hand side.

        Rows without free variables are checked immediately and not stored.
        """
        sense = Sense(sense)
        name = name or "c{}".format(len(self.constraints))
        terms, constant = self._owned_terms(expr - rhs, "constraint {}".format(name))
        rhs_value = -constant
        if not terms:
            satisfied = {
                Sense.LE: 0.0 <= rhs_value + 1e-9,
                Sense.GE: 0.0 >= rhs_value - 1e-9,
                Sense.EQ: abs(rhs_value) <= 1e-9,
            }[sense]
            if not satisfied:
                raise ModelError(
                    "Constraint {} without variables is violated".format(name)
                )
            LOGGER.debug("Dropping constant constraint %s", name)
            return None
        body = pyo.quicksum(coef * var for var, coef in terms)
        if sense is Sense.LE:
            relation = body <= rhs_value
        elif sense is Sense.GE:
            relation = body >= rhs_value
        else:
            relation = body == rhs_value
        row = pyo.Constraint(expr=relation)
        self._declare(self.block.rows, name, row, "constraint")
        self.constraints.append(row)
        return row

    def set_objective(
        self,
        expr: Expression,
        sense: Union[ObjectiveSense, str] = ObjectiveSense.MINIMIZE,
    ):
        """Replace the objective."""
        self._owned_terms(expr, "objective")
        self.objective_sense = ObjectiveSense(sense)
        self.block.del_component(self.block.objective)
        self.block.objective = pyo.Objective(
            expr=expr, sense=self.objective_sense.pyomo
        )

    def bounds_of(self, expr: Expression) -> Tuple[float, float]:
        """Interval of an expression over the variable bounds."""
        terms, low = linear_terms(expr)
        high = low
        for var, coef in terms:
            lower, upper = var_range(var)
            if coef > 0:
                low += coef * lower
                high += coef * upper
            else:
                low += coef * upper
                high += coef * lower
        return low, high

    def matrix_form(self) -> MatrixForm:
        """Cost vector, sparse rows and bounds from the standard representation."""
        position = ComponentMap((var, index) for index, var in enumerate(self.variables))
        objective, offset = linear_terms(self.objective)
        cost = np.zeros(len(self.variables))
        for var, coef in objective:
            cost[position[var]] += coef
        rows, cols, data = [], [], []
        row_lower = np.empty(len(self.constraints))
        row_upper = np.empty(len(self.constraints))
        for number, row in enumerate(self.constraints):
            terms, constant = linear_terms(row.body)
            for var, coef in terms:
                rows.append(number)
                cols.append(position[var])
                data.append(coef)
            row_lower[number] = -math.inf if row.lb is None else row.lb - constant
            row_upper[number] = math.inf if row.ub is None else row.ub - constant
        matrix = sparse.csr_matrix(
            (data, (rows, cols)), shape=(len(self.constraints), len(self.variables))
        )
        ranges = [var_range(var) for var in self.variables]
        return MatrixForm(
            cost=cost,
            offset=offset,
            matrix=matrix,
            row_lower=row_lower,
            row_upper=row_upper,
            lower=np.array([lower for lower, _ in ranges]),
            upper=np.array([upper for _, upper in ranges]),
            integrality=np.array(
                [0 if var.is_continuous() else 1 for var in self.variables]
            ),
        )

    def values(self) -> Dict[str, float]:
        """Current Pyomo variable values by name.

        Variables the solver left unset take the bounded value nearest zero.
        """
        values = {}
        for var in self.variables:
            if var.value is None:
                lower, upper = var_range(var)
                values[var.local_name] = min(max(0.0, lower), upper)
            else:
                values[var.local_name] = float(var.value)
        return values
