"""One-stop construction of moments, recurrence and auxiliary tables at a single t."""

from __future__ import annotations

from dataclasses import dataclass

from .auxiliary import AuxiliaryTable, aux_quantities
from .orthopoly import RecurrenceTable, recurrence_table
from .weight_moments import MomentTable, PrecisionContext, WeightParams, WeightQuadrature, moment_table

ALL_PARTS = ("xy", "Rr", "imp")


@dataclass
class Cell:
    params: WeightParams
    prec: PrecisionContext
    moments: MomentTable
    table: RecurrenceTable
    aux: AuxiliaryTable | None
    quad: WeightQuadrature

    @property
    def node_counts(self) -> dict:
        return dict(self.quad.node_counts)


def build_cell(params: WeightParams, prec: PrecisionContext, n_max: int, frozen=None, parts=ALL_PARTS,
               cache_dir=None) -> Cell:
    """Moments to 2 n_max + 6, the recurrence through n_max, and the aux parts."""
    quad = WeightQuadrature(params, prec, frozen=frozen)
    moments = moment_table(params, prec, 2 * n_max + 6, quadrature=quad, cache_dir=cache_dir)
    table = recurrence_table(moments, n_max)
    aux = aux_quantities(table, quad, parts=parts) if parts else None
    return Cell(params, prec, moments, table, aux, quad)
