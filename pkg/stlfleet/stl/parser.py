"""
Parser and printer for the textual mission DSL.

The grammar is LALR(1). Operator precedence, from tightest to loosest:
unary (``!``, ``G[a,b]``, ``F[a,b]``) > ``&&`` > ``||`` > ``U[a,b]`` > ``=>``.
``U`` is non-associative, ``=>`` associates to the right, and every unparenthesised
``&&`` (``||``) chain becomes a single n-ary node.

Example::

    F[0,20] in(d1,goal) && G[0,20] out(d1,obs) && G[0,20] sep(d1,d2) >= 0.5
    G[0,10] 1.0*d1.pz - 0.5*d2.pz >= 1.5
"""
from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedEOF, UnexpectedInput, VisitError

from stlfleet.exceptions import StlFleetException, StlFleetSyntaxException
from stlfleet.stl.formula import (
    Always,
    And,
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
    Separation,
    TrueFormula,
    Until,
)
from stlfleet.validators import validate_interval

GRAMMAR = r"""
?start: implication

?implication: until_expr
            | until_expr "=>" implication                          -> implies

?until_expr: or_expr
           | or_expr "U" interval or_expr                          -> until

?or_expr: and_expr
        | and_expr ("||" and_expr)+                                -> disjunction

?and_expr: unary
         | unary ("&&" unary)+                                     -> conjunction

?unary: "!" unary                                                  -> negation
      | "G" interval unary                                         -> always
      | "F" interval unary                                         -> eventually
      | atom

?atom: "true"                                                      -> true
     | "in" "(" NAME "," NAME ")"                                  -> inside
     | "out" "(" NAME "," NAME ")"                                 -> outside
     | "sep" "(" NAME "," NAME ")" ">=" signed_number              -> separation
     | affine ">=" signed_number                                   -> halfspace
     | "(" implication ")"

interval: "[" signed_number "," signed_number "]"
signed_number: [ADDOP] NUMBER
affine: [ADDOP] term (ADDOP term)*
term: NUMBER "*" NAME "." AXIS

ADDOP: "+" | "-"
AXIS: "px" | "py" | "pz"
NAME: /[A-Za-z_][A-Za-z0-9_]*/
NUMBER: /(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?/

%import common.WS
%ignore WS
"""

_AXES = {"px": 0, "py": 1, "pz": 2}

_PARSER = Lark(GRAMMAR, parser="lalr", propagate_positions=True, maybe_placeholders=True)


@v_args(inline=True)
class _FormulaBuilder(Transformer):
    """Turns the lark parse tree into formula models."""

    def true(self):
        return TrueFormula()

    def negation(self, child):
        return Not(child=child)

    def conjunction(self, *items):
        return And(children=items)

    def disjunction(self, *items):
        return Or(children=items)

    def implies(self, premise, conclusion):
        return Implies(premise=premise, conclusion=conclusion)

    def always(self, iv, child):
        return Always(interval=iv, child=child)

    def eventually(self, iv, child):
        return Eventually(interval=iv, child=child)

    def until(self, left, iv, right):
        return Until(interval=iv, left=left, right=right)

    def inside(self, agent, region):
        return Pred(predicate=InsideBox(agent=str(agent), region=str(region)))

    def outside(self, agent, region):
        return Pred(predicate=OutsideBox(agent=str(agent), region=str(region)))

    def separation(self, agent_i, agent_j, delta):
        return Pred(predicate=Separation(agent_i=str(agent_i), agent_j=str(agent_j), delta_min=delta))

    @v_args(meta=True)
    def interval(self, meta, items):
        lo, hi = validate_interval(items[0], items[1], meta.line, meta.column)
        return Interval(lo=lo, hi=hi)

    def signed_number(self, sign, number):
        value = float(number)
        return -value if sign == "-" else value

    def term(self, coefficient, agent, axis):
        return float(coefficient), str(agent), _AXES[str(axis)]

    @v_args(meta=True)
    def affine(self, meta, items):
        terms = []
        sign = items[0]
        for item in items[1:]:
            if isinstance(item, tuple):
                coefficient, agent, axis = item
                terms.append((-coefficient if sign == "-" else coefficient, agent, axis))
            else:
                sign = item
        agents = {agent for _, agent, _ in terms}
        if len(agents) != 1:
            raise StlFleetSyntaxException(
                f"affine predicate must refer to a single agent, got {sorted(agents)}", meta.line, meta.column
            )
        coefficients = [0.0, 0.0, 0.0]
        for coefficient, _, axis in terms:
            coefficients[axis] += coefficient
        return agents.pop(), tuple(coefficients)

    def halfspace(self, affine, rhs):
        agent, coefficients = affine
        return Pred(predicate=Halfspace(agent=agent, coefficients=coefficients, offset=-rhs))


def parse_formula(text: str) -> Formula:
    """
    Parse a mission formula written in the DSL.

    Agent and region names are not resolved here; see
    :func:`stlfleet.stl.formula.bind_regions`.

    :param text: The formula text.
    :returns: The formula AST.
    :raises StlFleetSyntaxException: If the text does not conform to the grammar.
    :raises StlFleetIntervalException: If an interval has ``lo < 0`` or ``lo > hi``.
    """
    try:
        tree = _PARSER.parse(text)
    except UnexpectedEOF as exc:
        lines = text.splitlines() or [""]
        raise StlFleetSyntaxException("unexpected end of formula", len(lines), len(lines[-1]) + 1) from exc
    except UnexpectedInput as exc:
        raise StlFleetSyntaxException(str(exc).strip().splitlines()[0], exc.line, exc.column) from exc
    try:
        return _FormulaBuilder().transform(tree)
    except VisitError as exc:
        if isinstance(exc.orig_exc, StlFleetException):
            raise exc.orig_exc from None
        raise


def _format_affine(p: Halfspace) -> str:
    terms = [(c, axis) for axis, c in zip(("px", "py", "pz"), p.coefficients) if c != 0.0]
    if not terms:
        terms = [(0.0, "px")]
    parts = []
    for position, (coefficient, axis) in enumerate(terms):
        magnitude = repr(abs(coefficient))
        if position == 0:
            parts.append(f"{'-' if coefficient < 0 else ''}{magnitude}*{p.agent}.{axis}")
        else:
            parts.append(f"{'-' if coefficient < 0 else '+'} {magnitude}*{p.agent}.{axis}")
    return f"{' '.join(parts)} >= {-p.offset!r}"


def _format_interval(iv: Interval) -> str:
    return f"[{iv.lo!r},{iv.hi!r}]"


def format_formula(f: Formula) -> str:
    """
    Print a formula in the DSL.

    Binary and n-ary nodes are always parenthesised, so ``parse_formula`` returns a
    structurally equal formula for every AST whose ``And``/``Or`` nodes have at least
    two children. Region boxes are not printed.

    :param f: The formula.
    :returns: The formula text.
    """
    if isinstance(f, TrueFormula):
        return "true"
    if isinstance(f, Pred):
        p = f.predicate
        if isinstance(p, Halfspace):
            return _format_affine(p)
        if isinstance(p, Separation):
            return f"sep({p.agent_i},{p.agent_j}) >= {p.delta_min!r}"
        keyword = "in" if isinstance(p, InsideBox) else "out"
        return f"{keyword}({p.agent},{p.region})"
    if isinstance(f, Not):
        return f"!{format_formula(f.child)}"
    if isinstance(f, Always):
        return f"G{_format_interval(f.interval)} {format_formula(f.child)}"
    if isinstance(f, Eventually):
        return f"F{_format_interval(f.interval)} {format_formula(f.child)}"
    if isinstance(f, (And, Or)):
        if len(f.children) == 1:
            return format_formula(f.children[0])
        glue = " && " if isinstance(f, And) else " || "
        return "(" + glue.join(format_formula(child) for child in f.children) + ")"
    if isinstance(f, Implies):
        return f"({format_formula(f.premise)} => {format_formula(f.conclusion)})"
    return f"({format_formula(f.left)} U{_format_interval(f.interval)} {format_formula(f.right)})"
