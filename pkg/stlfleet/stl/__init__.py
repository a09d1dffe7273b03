"""
Signal Temporal Logic formulas: AST, predicates and the mission DSL.
"""
from stlfleet.stl.formula import (
    Always,
    And,
    Box,
    Eventually,
    Formula,
    Halfspace,
    Implies,
    InsideBox,
    Interval,
    Not,
    Or,
    OutsideBox,
    Pred,
    Predicate,
    Separation,
    TrueFormula,
    Until,
    always,
    bind_regions,
    conjunction,
    disjunction,
    eval_predicate,
    eventually,
    formula_agents,
    formula_regions,
    halfspace,
    horizon,
    inside,
    interval,
    iter_predicates,
    outside,
    separation,
    until,
)
from stlfleet.stl.parser import format_formula, parse_formula

__all__ = [
    "Always",
    "And",
    "Box",
    "Eventually",
    "Formula",
    "Halfspace",
    "Implies",
    "InsideBox",
    "Interval",
    "Not",
    "Or",
    "OutsideBox",
    "Pred",
    "Predicate",
    "Separation",
    "TrueFormula",
    "Until",
    "always",
    "bind_regions",
    "conjunction",
    "disjunction",
    "eval_predicate",
    "eventually",
    "format_formula",
    "formula_agents",
    "formula_regions",
    "halfspace",
    "horizon",
    "inside",
    "interval",
    "iter_predicates",
    "outside",
    "parse_formula",
    "separation",
    "until",
]
