# Standard library imports
import logging
import re
from typing import Dict, List, NamedTuple, Optional, Sequence

# Third-party imports
import numpy as np

# Local imports
from src.settings import settings
from src.look_and_feel import info
from src.linalg import CMatrix, PreconditionError
from src.region import Disk, Rectangle, Region
from src.mfunc import (Add, BlockDiag, Const, Entrywise, Exp, ExpFamily, MatrixFunction, Mul, Neg, Pencil,
                       Resolvent, ScalarExpr, Sub, Taylor, TrailingBlock, UnitaryConjugate, Var,
                       add, mul, neg, sub)


class ScenarioError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ScenarioParseError(ScenarioError):
    def __init__(self, line: int, column: int, expected: Sequence[str], found: str):
        self.column = column
        self.expected = list(expected)
        self.found = found
        super().__init__(f"column {column}: expected {' or '.join(self.expected)}, found {found!r}", line)


class Scenario(NamedTuple):
    function: MatrixFunction
    region: Optional[Region]
    bindings: Dict[str, CMatrix]
    function_name: str


class Token(NamedTuple):
    kind: str
    text: str
    line: int
    column: int


_NUMBER = r'(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?'
_TOKEN_RE = re.compile(
    rf'(?P<GRID>\d+x\d+)(?![\w.])'
    rf'|(?P<IMAG>{_NUMBER}i)(?!\w)'
    rf'|(?P<NUMBER>{_NUMBER})'
    r'|(?P<NAME>[A-Za-z_][A-Za-z0-9_]*)'
    r'|(?P<OP>[\[\](),;=+\-*])'
    r'|(?P<SPACE>\s+)'
)


def tokenize_line(text: str, line: int) -> List[Token]:
    text = text.split('#', 1)[0]
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ScenarioParseError(line, pos + 1, ['a token'], text[pos])
        kind = m.lastgroup
        if kind != 'SPACE':
            tokens.append(Token(kind, m.group(), line, pos + 1))
        pos = m.end()
    tokens.append(Token('END', '', line, len(text) + 1))
    return tokens


class _LineParser:
    """Recursive descent over the tokens of one scenario line."""

    def __init__(self, tokens: List[Token], bindings: Dict[str, CMatrix]):
        self.tokens = tokens
        self.pos = 0
        self.bindings = bindings

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def fail(self, *expected: str):
        tok = self.current
        raise ScenarioParseError(tok.line, tok.column, expected, tok.text or 'end of line')

    def accept(self, text: str) -> bool:
        if self.current.text == text and self.current.kind in ('OP', 'NAME'):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.current
        if not self.accept(text):
            self.fail(f"'{text}'")
        return tok

    def expect_kind(self, kind: str, description: str) -> Token:
        tok = self.current
        if tok.kind != kind:
            self.fail(description)
        self.pos += 1
        return tok

    def expect_end(self):
        if self.current.kind != 'END':
            self.fail('end of line')

    # scalar expressions

    def scalar(self) -> ScalarExpr:
        left = self.term()
        while self.current.text in ('+', '-') and self.current.kind == 'OP':
            op = self.current.text
            self.pos += 1
            right = self.term()
            left = _fold(add if op == '+' else sub, left, right)
        return left

    def term(self) -> ScalarExpr:
        left = self.unary()
        while self.accept('*'):
            left = _fold(mul, left, self.unary())
        return left

    def unary(self) -> ScalarExpr:
        if self.accept('-'):
            return neg(self.unary())
        if self.accept('+'):
            return self.unary()
        return self.atom()

    def atom(self) -> ScalarExpr:
        tok = self.current
        if tok.kind == 'NUMBER':
            self.pos += 1
            return Const(complex(float(tok.text)))
        if tok.kind == 'IMAG':
            self.pos += 1
            return Const(complex(0.0, float(tok.text[:-1])))
        if tok.kind == 'NAME':
            if tok.text == 'z':
                self.pos += 1
                return Var()
            if tok.text == 'i':
                self.pos += 1
                return Const(1j)
            if tok.text == 'exp':
                self.pos += 1
                self.expect('(')
                arg = self.scalar()
                self.expect(')')
                return Const(complex(np.exp(arg.value))) if isinstance(arg, Const) else Exp(arg)
        if self.accept('('):
            inner = self.scalar()
            self.expect(')')
            return inner
        self.fail('a number', "'z'", "'i'", "'exp'", "'('")

    def constant(self, what: str) -> complex:
        tok = self.current
        expr = self.scalar()
        if not isinstance(expr, Const):
            raise ScenarioParseError(tok.line, tok.column, [f"a constant {what}"], tok.text)
        return expr.value

    def real(self, what: str) -> float:
        tok = self.current
        value = self.constant(what)
        if value.imag != 0:
            raise ScenarioParseError(tok.line, tok.column, [f"a real {what}"], tok.text)
        return value.real

    # matrices

    def expr_grid(self) -> List[List[ScalarExpr]]:
        start = self.current
        self.expect('[')
        rows = [self.expr_row()]
        while self.accept(','):
            rows.append(self.expr_row())
        self.expect(']')
        n = len(rows)
        if any(len(row) != n for row in rows):
            raise ScenarioError(f"matrix at column {start.column} is not square "
                                f"({n} rows, row lengths {[len(r) for r in rows]})", start.line)
        if n > settings.max_dimension:
            raise ScenarioError(f"dimension {n} exceeds the cap of {settings.max_dimension}", start.line)
        return rows

    def expr_row(self) -> List[ScalarExpr]:
        self.expect('[')
        row = [self.scalar()]
        while self.accept(','):
            row.append(self.scalar())
        self.expect(']')
        return row

    def matrix_literal(self) -> CMatrix:
        start = self.current
        rows = self.expr_grid()
        if not all(isinstance(e, Const) for row in rows for e in row):
            raise ScenarioParseError(start.line, start.column, ['a constant matrix'], start.text)
        return np.array([[e.value for e in row] for row in rows], dtype=complex)

    def matrix_ref(self) -> CMatrix:
        tok = self.current
        if tok.kind == 'OP' and tok.text == '[':
            return self.matrix_literal()
        name = self.expect_kind('NAME', 'a matrix name')
        if name.text not in self.bindings:
            raise ScenarioError(f"column {name.column}: matrix '{name.text}' is not defined", name.line)
        return self.bindings[name.text]

    # functions

    def function(self) -> MatrixFunction:
        tok = self.current
        if tok.kind == 'OP' and tok.text == '[':
            return Entrywise(tuple(tuple(row) for row in self.expr_grid()))
        if tok.kind != 'NAME':
            self.fail("'['", "'resolvent'", "'pencil'", "'expz'", "'blockdiag'", "'conj'", "'taylor'")
        self.pos += 1
        if tok.text in ('resolvent', 'pencil', 'expz'):
            self.expect('(')
            A = self.matrix_ref()
            self.expect(')')
            return {'resolvent': Resolvent, 'pencil': Pencil, 'expz': ExpFamily}[tok.text](A)
        if tok.text == 'blockdiag':
            self.expect('(')
            blocks = [self.function()]
            while self.accept(','):
                blocks.append(self.function())
            self.expect(')')
            return BlockDiag(tuple(blocks))
        if tok.text == 'conj':
            self.expect('(')
            U = self.matrix_ref()
            self.expect(',')
            inner = self.function()
            self.expect(',')
            V = self.matrix_ref()
            self.expect(')')
            return UnitaryConjugate(U, inner, V)
        if tok.text == 'taylor':
            self.expect('(')
            center = self.constant('center')
            self.expect(';')
            coeffs = [self.matrix_ref()]
            while self.accept(','):
                coeffs.append(self.matrix_ref())
            radius = float('inf')
            if self.accept(';'):
                self.expect('radius')
                self.expect('=')
                radius = self.real('radius')
            self.expect(')')
            return Taylor(center, tuple(coeffs), radius)
        if tok.text in self.bindings:
            M = self.bindings[tok.text]
            return Entrywise(tuple(tuple(Const(complex(v)) for v in row) for row in M))
        self.pos -= 1
        self.fail("'['", "'resolvent'", "'pencil'", "'expz'", "'blockdiag'", "'conj'", "'taylor'", 'a matrix name')

    # regions

    def region(self) -> Region:
        shape = self.current
        if not (self.accept('rect') or self.accept('disk')):
            self.fail("'rect'", "'disk'")
        keys = ('re', 'im', 'grid') if shape.text == 'rect' else ('center', 'radius', 'grid')
        values = {}
        while self.current.kind != 'END':
            key = self.current
            if key.kind != 'NAME' or key.text not in keys or key.text in values:
                self.fail(*[f"'{k}='" for k in keys if k not in values])
            self.pos += 1
            self.expect('=')
            if key.text in ('re', 'im'):
                self.expect('[')
                low = self.real('bound')
                self.expect(',')
                high = self.real('bound')
                self.expect(']')
                values[key.text] = (low, high)
            elif key.text == 'grid':
                grid = self.expect_kind('GRID', 'a grid size like 101x101')
                values['grid'] = tuple(int(part) for part in grid.text.split('x'))
            elif key.text == 'center':
                values['center'] = self.constant('center')
            else:
                values['radius'] = self.real('radius')
        missing = [k for k in keys if k not in values]
        if missing:
            self.fail(*[f"'{k}='" for k in missing])
        if shape.text == 'rect':
            (re_min, re_max), (im_min, im_max) = values['re'], values['im']
            return Rectangle(re_min, re_max, im_min, im_max, *values['grid'])
        return Disk(values['center'], values['radius'], *values['grid'])


def _fold(op, left: ScalarExpr, right: ScalarExpr) -> ScalarExpr:
    if isinstance(left, Const) and isinstance(right, Const):
        if op is add:
            return Const(left.value + right.value)
        if op is sub:
            return Const(left.value - right.value)
        return Const(left.value * right.value)
    return op(left, right)


def parse_scenario(text: str) -> Scenario:
    bindings: Dict[str, CMatrix] = {}
    function = None
    function_name = None
    region = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        tokens = tokenize_line(line, line_no)
        if tokens[0].kind == 'END':
            continue
        parser = _LineParser(tokens, bindings)
        keyword = tokens[0]
        try:
            if parser.accept('matrix'):
                name = parser.expect_kind('NAME', 'a matrix name')
                parser.expect('=')
                M = parser.matrix_literal()
                parser.expect_end()
                if name.text in bindings:
                    raise ScenarioError(f"matrix '{name.text}' is defined twice", line_no)
                bindings[name.text] = M
            elif parser.accept('function'):
                name = parser.expect_kind('NAME', 'a function name')
                parser.expect('=')
                parsed = parser.function()
                parser.expect_end()
                if function is not None:
                    raise ScenarioError("a scenario defines exactly one function", line_no)
                function, function_name = parsed, name.text
            elif parser.accept('region'):
                parsed_region = parser.region()
                parser.expect_end()
                if region is not None:
                    raise ScenarioError("a scenario defines at most one region", line_no)
                region = parsed_region
            else:
                raise ScenarioParseError(line_no, keyword.column, ["'matrix'", "'function'", "'region'"],
                                         keyword.text)
        except PreconditionError as e:
            raise ScenarioError(str(e), line_no) from e
    if function is None:
        raise ScenarioError("scenario defines no function")
    logging.debug(info(f"Parsed scenario function '{function_name}' (n = {function.n})"))
    return Scenario(function, region, bindings, function_name)


def load_scenario(path: str) -> Scenario:
    with open(path, 'r', encoding='utf-8') as f:
        return parse_scenario(f.read())


# pretty printing

def format_complex(value: complex) -> str:
    value = complex(value)
    re_part, im_part = value.real, value.imag
    if im_part == 0:
        text = repr(re_part)
    elif re_part == 0:
        text = f"{im_part!r}i"
    else:
        sign = '+' if im_part >= 0 else '-'
        return f"({re_part!r}{sign}{abs(im_part)!r}i)"
    return f"({text})" if text.startswith('-') else text


def format_expr(expr: ScalarExpr) -> str:
    if isinstance(expr, Const):
        return format_complex(expr.value)
    if isinstance(expr, Var):
        return 'z'
    if isinstance(expr, Neg):
        return f"(-{format_expr(expr.arg)})"
    if isinstance(expr, Exp):
        return f"exp({format_expr(expr.arg)})"
    op = {Add: '+', Sub: '-', Mul: '*'}[type(expr)]
    return f"({format_expr(expr.left)}{op}{format_expr(expr.right)})"


def format_matrix(M: CMatrix) -> str:
    return '[' + ','.join('[' + ','.join(format_complex(v) for v in row) + ']' for row in M) + ']'


def format_region(region: Region) -> str:
    if isinstance(region, Rectangle):
        return (f"rect re=[{format_complex(region.re_min)},{format_complex(region.re_max)}] "
                f"im=[{format_complex(region.im_min)},{format_complex(region.im_max)}] "
                f"grid={region.n_re}x{region.n_im}")
    return (f"disk center={format_complex(region.center)} radius={format_complex(region.radius)} "
            f"grid={region.n_radial}x{region.n_angular}")


class _Namer:
    def __init__(self, bindings: Dict[str, CMatrix]):
        self.bindings = dict(bindings)
        self.lines = [f"matrix {name}={format_matrix(M)}" for name, M in bindings.items()]
        self.counter = 0

    def name_of(self, M: CMatrix) -> str:
        for name, bound in self.bindings.items():
            if bound.shape == M.shape and np.array_equal(bound, M):
                return name
        while True:
            self.counter += 1
            name = f"M{self.counter}"
            if name not in self.bindings:
                break
        self.bindings[name] = M
        self.lines.append(f"matrix {name}={format_matrix(M)}")
        return name

    def function(self, F: MatrixFunction) -> str:
        if isinstance(F, Entrywise):
            return '[' + ','.join('[' + ','.join(format_expr(e) for e in row) + ']' for row in F.entries) + ']'
        if isinstance(F, Resolvent):
            return f"resolvent({self.name_of(F.A)})"
        if isinstance(F, Pencil):
            return f"pencil({self.name_of(F.A)})"
        if isinstance(F, ExpFamily):
            return f"expz({self.name_of(F.A)})"
        if isinstance(F, BlockDiag):
            return 'blockdiag(' + ','.join(self.function(b) for b in F.blocks) + ')'
        if isinstance(F, UnitaryConjugate):
            return f"conj({self.name_of(F.U)},{self.function(F.inner)},{self.name_of(F.V)})"
        if isinstance(F, Taylor):
            text = f"taylor({format_complex(F.center)};" + ','.join(format_matrix(c) for c in F.coeffs)
            if F.radius != float('inf'):
                text += f";radius={format_complex(F.radius)}"
            return text + ')'
        raise ScenarioError(f"{type(F).__name__} has no scenario syntax")


def format_scenario(function: MatrixFunction, region: Optional[Region] = None,
                    bindings: Optional[Dict[str, CMatrix]] = None, function_name: str = "F") -> str:
    """Render a function (and region) in the scenario grammar so that parsing gives it back."""
    if isinstance(function, TrailingBlock):
        raise ScenarioError("extracted blocks have no scenario syntax")
    namer = _Namer(bindings or {})
    body = namer.function(function)
    lines = namer.lines + [f"function {function_name}={body}"]
    if region is not None:
        lines.append(f"region {format_region(region)}")
    return '\n'.join(lines) + '\n'
