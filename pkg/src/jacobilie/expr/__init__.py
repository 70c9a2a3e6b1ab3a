"""Symbolic expressions: parsing, differentiation, evaluation and zero testing."""

from .evaluate import DomainError, UnboundNameError, compile_exprs, evaluate, evaluate_many
from .nodes import (ONE, ZERO, Add, Const, Cos, Cosh, Exp, Expr, ExpInt1, Function, Ln, Mul,
                    Param, Pow, Sin, Sinh, Var, add, as_expr, const, cos, cosh, diff, ei1, exp,
                    ln, mul, param, parameters, power, expand, render, sin, sinh, subs, var, variables)
from .parse import ParseError, UnknownIdentifierError, parse
from .sampling import (DEFAULT_SAMPLES, DEFAULT_TOL, BadBoxError, SamplingBox, ZeroTest,
                       combine_tests, is_zero)
from .special import exp_int1

Point = dict  # name -> float binding, as accepted by ``evaluate``

__all__ = [
    "Expr", "Const", "Var", "Param", "Add", "Mul", "Pow", "Function", "Exp", "Ln", "Sinh",
    "Cosh", "Sin", "Cos", "ExpInt1", "ZERO", "ONE", "const", "var", "param", "add", "mul",
    "power", "exp", "ln", "sinh", "cosh", "sin", "cos", "ei1", "as_expr", "diff", "subs",
    "render", "variables", "parameters", "expand", "parse", "ParseError", "UnknownIdentifierError",
    "evaluate", "evaluate_many", "compile_exprs", "DomainError", "UnboundNameError",
    "SamplingBox", "ZeroTest", "BadBoxError", "is_zero", "combine_tests", "exp_int1",
    "DEFAULT_SAMPLES", "DEFAULT_TOL", "Point",
]
