"""
Dense probability tables over named discrete variables.

A ``ProbTable`` is a numpy array with one axis per variable. Products align
axes by variable name and broadcast, so factor algebra (multiply, sum out,
condition on evidence) reads like the formulas it evaluates.
"""

from typing import Iterable, Mapping, Sequence

import numpy as np

from cmdesign.errors import ModelError, UnboundVariable


class ProbTable:
    """Non-negative table indexed by assignments to named variables."""

    def __init__(
            self,
            variables: Sequence[str],
            domains: Sequence[Sequence],
            values: np.ndarray,
    ) -> None:
        self.variables = tuple(variables)
        self.domains = tuple(tuple(d) for d in domains)
        values = np.asarray(values, dtype=float)
        expected = tuple(len(d) for d in self.domains)
        if len(set(self.variables)) != len(self.variables):
            raise ModelError(f"repeated variable in table {self.variables}")
        if values.shape != expected:
            raise ModelError(
                f"table shape {values.shape} does not match domains {expected}")
        self.values = values

    def __repr__(self) -> str:
        return f"ProbTable(variables={self.variables}, total={self.total():.6g})"

    @classmethod
    def scalar(cls, value: float) -> "ProbTable":
        return cls((), (), np.asarray(float(value)))

    @classmethod
    def constant(cls, variables: Sequence[str], domains: Sequence[Sequence],
                 value: float = 1.0) -> "ProbTable":
        shape = tuple(len(d) for d in domains)
        return cls(variables, domains, np.full(shape, float(value)))

    def domain(self, variable: str) -> tuple:
        try:
            return self.domains[self.variables.index(variable)]
        except ValueError:
            raise UnboundVariable(variable) from None

    def index_of(self, variable: str, value) -> int:
        domain = self.domain(variable)
        for i, v in enumerate(domain):
            if v == value or str(v) == str(value):
                return i
        raise ModelError(f"value {value!r} not in domain of {variable}: {list(domain)}")

    def total(self) -> float:
        return float(self.values.sum())

    def marginal(self, keep: Iterable[str]) -> "ProbTable":
        """Sums out every variable not in ``keep``; axes follow ``keep`` order."""
        keep = list(dict.fromkeys(keep))
        missing = [v for v in keep if v not in self.variables]
        if missing:
            raise UnboundVariable(missing[0])
        drop = tuple(i for i, v in enumerate(self.variables) if v not in keep)
        summed = self.values.sum(axis=drop) if drop else self.values
        remaining = [v for v in self.variables if v in keep]
        table = ProbTable(remaining, [self.domain(v) for v in remaining], summed)
        return table.reorder(keep)

    def sum_out(self, variables: Iterable[str]) -> "ProbTable":
        drop = set(variables)
        return self.marginal([v for v in self.variables if v not in drop])

    def reorder(self, order: Sequence[str]) -> "ProbTable":
        order = list(order)
        if sorted(order) != sorted(self.variables):
            raise ModelError(f"cannot reorder {self.variables} as {order}")
        axes = [self.variables.index(v) for v in order]
        return ProbTable(order, [self.domain(v) for v in order],
                         np.transpose(self.values, axes))

    def reduce(self, evidence: Mapping[str, object]) -> "ProbTable":
        """Fixes the given variables to values and drops their axes."""
        index = []
        keep = []
        for v, dom in zip(self.variables, self.domains):
            if v in evidence:
                index.append(self.index_of(v, evidence[v]))
            else:
                index.append(slice(None))
                keep.append(v)
        return ProbTable(keep, [self.domain(v) for v in keep], self.values[tuple(index)])

    def aligned(self, variables: Sequence[str]) -> np.ndarray:
        """Array broadcastable against a table over ``variables``."""
        variables = list(variables)
        positions = [variables.index(v) for v in self.variables]
        order = np.argsort(positions, kind="stable")
        arr = np.transpose(self.values, order) if self.variables else self.values
        shape = [1] * len(variables)
        for v, dom in zip(self.variables, self.domains):
            shape[variables.index(v)] = len(dom)
        return arr.reshape(shape)

    def _union(self, other: "ProbTable") -> tuple[list[str], list[tuple]]:
        variables = list(self.variables)
        domains = list(self.domains)
        for v, dom in zip(other.variables, other.domains):
            if v in variables:
                if domains[variables.index(v)] != dom:
                    raise ModelError(f"domain mismatch for {v}")
            else:
                variables.append(v)
                domains.append(dom)
        return variables, domains

    def __mul__(self, other: "ProbTable") -> "ProbTable":
        variables, domains = self._union(other)
        values = self.aligned(variables) * other.aligned(variables)
        shape = tuple(len(d) for d in domains)
        return ProbTable(variables, domains, np.broadcast_to(values, shape).copy())

    def value(self, assignment: Mapping[str, object]) -> float:
        return float(self.reduce(assignment).values)

    def items(self):
        """Yields (assignment dict, value) pairs in index order."""
        for index in np.ndindex(*self.values.shape):
            assignment = {v: self.domains[k][i]
                          for k, (v, i) in enumerate(zip(self.variables, index))}
            yield assignment, float(self.values[index])

    def allclose(self, other: "ProbTable", atol: float = 1e-9) -> bool:
        if sorted(self.variables) != sorted(other.variables):
            return False
        other = other.reorder(self.variables)
        return bool(np.allclose(self.values, other.values, rtol=0.0, atol=atol))


def product(tables: Iterable[ProbTable]) -> ProbTable:
    result = ProbTable.scalar(1.0)
    for t in tables:
        result = result * t
    return result
