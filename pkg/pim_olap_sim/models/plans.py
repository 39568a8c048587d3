"""Denormalization and physical execution plans."""

from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from pim_olap_sim.models.hardware import PimLevelSpec
from pim_olap_sim.models.kernel import Predicate
from pim_olap_sim.models.query import BoolExpr, JoinEdge, QueryIR, ResidualJoin
from pim_olap_sim.models.schema import TableDef


class DenormLevel(str, Enum):
    D1 = "D1"
    D2 = "D2"
    D3 = "D3"
    D4 = "D4"

    @property
    def rank(self) -> int:
        return int(self.value[1])


class FoldEntry(BaseModel):
    """A dimension column folded into the fact table through an FK path."""

    model_config = ConfigDict(frozen=True)

    path: Tuple[str, ...]
    table: str
    column: str
    name: str = Field(..., description="Column name in the widetable")

    @property
    def key(self) -> Tuple[Tuple[str, ...], str]:
        return (self.path, self.column)


class DenormPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    level: DenormLevel
    fact_table: str
    fold: List[FoldEntry] = Field(default_factory=list)
    widetable: TableDef
    residual_joins: Dict[str, List[ResidualJoin]] = Field(default_factory=dict)

    @property
    def fold_set(self) -> set:
        """(table, column) pairs, the level-nesting view of the fold."""
        return {(entry.table, entry.column) for entry in self.fold}

    def entry_for(self, path: Tuple[str, ...], column: str) -> Optional[FoldEntry]:
        for entry in self.fold:
            if entry.path == path and entry.column == column:
                return entry
        return None


class PimPredicate(BaseModel):
    """A code-space predicate on one packed column of the target table."""

    model_config = ConfigDict(frozen=True)

    column: str
    predicate: Predicate
    estimated_selectivity: float = Field(default=1.0, ge=0.0, le=1.0)


class PimTree(BaseModel):
    """PIM-eligible disjunction evaluated as per-branch bitmaps."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["and", "or", "leaf"]
    leaf: Optional[PimPredicate] = None
    children: List["PimTree"] = Field(default_factory=list)

    def leaves(self) -> List[PimPredicate]:
        if self.leaf is not None:
            return [self.leaf]
        found: List[PimPredicate] = []
        for child in self.children:
            found.extend(child.leaves())
        return found


class PhysicalPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    query: QueryIR
    spec: PimLevelSpec
    target_table: str
    pim_predicates: List[PimPredicate] = Field(default_factory=list)
    pim_disjunctions: List[PimTree] = Field(default_factory=list)
    build_filters: Dict[str, BoolExpr] = Field(default_factory=dict)
    cpu_predicates: Optional[BoolExpr] = None
    joins: List[JoinEdge] = Field(default_factory=list)
    residual_joins: List[ResidualJoin] = Field(default_factory=list)

    @property
    def pim_passes(self) -> int:
        return len(self.pim_predicates) + sum(len(t.leaves()) for t in self.pim_disjunctions)


PimTree.model_rebuild()
