import re
from dataclasses import dataclass
from typing import List

from src.errors import ExprSyntaxError, IndexOutOfRangeError, UnknownIdentifierError
from src.expr.nodes import FUNCTIONS, Add, Call, Div, Expr, Mul, Neg, Node, Num, Pow, Sub, Var


BINARY_PRECEDENCE = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
RIGHT_ASSOCIATIVE = {"^"}
UNARY_PRECEDENCE = 25
BINARY_NODES = {"+": Add, "-": Sub, "*": Mul, "/": Div, "^": Pow}

_TOKEN_PATTERN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^])"
    r"|(?P<paren>[()])"
    r")"
)
_VARIABLE_PATTERN = re.compile(r"([xu])(\d+)")


@dataclass(frozen=True)
class Token:
    kind: str  # num | ident | op | paren | end
    text: str
    offset: int


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN_PATTERN.match(text, pos)
        if match is None or match.end() == pos or match.lastgroup is None:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"Unexpected character '{text[start]}'", _byte_offset(text, start))
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append(Token(kind, match.group(kind), _byte_offset(text, start)))
        pos = match.end()
    tokens.append(Token("end", "", len(text.encode("utf-8"))))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int, r: int):
        self.tokens = tokenize(text)
        self.pos = 0
        self.n = n
        self.r = r

    def _peek(self) -> Token:
        return self.tokens[self.pos]

    def _advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def _expect(self, text: str) -> None:
        token = self._advance()
        if token.text != text:
            found = token.text or "end of input"
            raise ExprSyntaxError(f"Expected '{text}' but found '{found}'", token.offset)

    def parse(self) -> Node:
        node = self._expression(0)
        token = self._peek()
        if token.kind != "end":
            raise ExprSyntaxError(f"Unexpected '{token.text}' after complete expression", token.offset)
        return node

    def _expression(self, min_precedence: int) -> Node:
        left = self._prefix()
        while True:
            token = self._peek()
            if token.kind != "op":
                break
            precedence = BINARY_PRECEDENCE[token.text]
            if precedence < min_precedence:
                break
            self._advance()
            next_min = precedence if token.text in RIGHT_ASSOCIATIVE else precedence + 1
            right = self._expression(next_min)
            left = BINARY_NODES[token.text](left, right)
        return left

    def _prefix(self) -> Node:
        token = self._advance()
        if token.kind == "op" and token.text == "-":
            return Neg(self._expression(UNARY_PRECEDENCE))
        if token.kind == "op" and token.text == "+":
            return self._expression(UNARY_PRECEDENCE)
        if token.kind == "num":
            return Num(float(token.text))
        if token.kind == "ident":
            return self._identifier(token)
        if token.kind == "paren" and token.text == "(":
            node = self._expression(0)
            self._expect(")")
            return node
        found = token.text or "end of input"
        raise ExprSyntaxError(f"Unexpected '{found}'", token.offset)

    def _identifier(self, token: Token) -> Node:
        name = token.text
        follows_call = self._peek().text == "("
        if name in FUNCTIONS:
            if not follows_call:
                raise ExprSyntaxError(f"Function '{name}' must be followed by '('", token.offset)
            self._advance()
            arg = self._expression(0)
            self._expect(")")
            return Call(name, arg)

        if name == "t":
            node = Var("t", 0)
        else:
            match = _VARIABLE_PATTERN.fullmatch(name)
            if match is None:
                raise UnknownIdentifierError(name, token.offset)
            kind, index = match.group(1), int(match.group(2))
            limit = self.n if kind == "x" else self.r
            if not 1 <= index <= limit:
                raise IndexOutOfRangeError(name, limit, token.offset)
            node = Var(kind, index)

        if follows_call:
            raise ExprSyntaxError(f"'{name}' is a variable, not a function", self._peek().offset)
        return node


def parse(text: str, n: int, r: int) -> Expr:
    """Parse ``text`` into an expression over t, x1..xn, u1..ur."""
    if n < 0 or r < 0:
        raise ValueError("Dimensions n and r must be >= 0")
    if not text or not text.strip():
        raise ExprSyntaxError("Empty expression", 0)
    return Expr(_Parser(text, n, r).parse(), n, r)
