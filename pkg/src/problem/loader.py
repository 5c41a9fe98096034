import logging
import re
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # Python 3.10: API-identical backport
    import tomli as tomllib
from pathlib import Path
from typing import Dict, List, Optional, Union

from src.errors import ExprError, InvariantError, ProblemFileError
from src.expr import parse
from src.problem.model import OCProblem


logger = logging.getLogger(__name__)

REQUIRED_KEYS = ("n", "r", "a", "b", "A", "B", "L")
_KEY_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*=")
_TOML_LINE = re.compile(r"line (\d+)")


def _key_lines(text: str) -> Dict[str, int]:
    lines: Dict[str, int] = {}
    for number, line in enumerate(text.splitlines(), 1):
        match = _KEY_LINE.match(line)
        if match and match.group(1) not in lines:
            lines[match.group(1)] = number
    return lines


def _as_int(data: dict, key: str, lines: Dict[str, int]) -> int:
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ProblemFileError(f"Expected an integer, got {value!r}", key, lines.get(key))
    if value < 1:
        raise ProblemFileError(f"Dimension must be >= 1, got {value}", key, lines.get(key))
    return value


def _as_float(data: dict, key: str, lines: Dict[str, int]) -> float:
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProblemFileError(f"Expected a number, got {value!r}", key, lines.get(key))
    return float(value)


def _as_vector(data: dict, key: str, size: int, lines: Dict[str, int]) -> List[float]:
    value = data[key]
    if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
        raise ProblemFileError(f"Expected a bracketed list of numbers, got {value!r}", key, lines.get(key))
    if len(value) != size:
        raise ProblemFileError(f"Expected {size} entries, got {len(value)}", key, lines.get(key))
    return [float(v) for v in value]


def _as_expr(data: dict, key: str, n: int, r: int, lines: Dict[str, int]):
    value = data[key]
    if not isinstance(value, str):
        raise ProblemFileError(f"Expected a quoted expression, got {value!r}", key, lines.get(key))
    try:
        return parse(value, n, r)
    except ExprError as e:
        raise ProblemFileError(str(e), key, lines.get(key)) from e


def parse_problem_text(text: str, default_name: str = "problem") -> OCProblem:
    """Build an OCProblem from problem-file text."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        match = _TOML_LINE.search(str(e))
        raise ProblemFileError(f"Malformed problem file: {e}", line=int(match.group(1)) if match else None) from e

    lines = _key_lines(text)
    for key in REQUIRED_KEYS:
        if key not in data:
            raise ProblemFileError("Missing required key", key)

    n = _as_int(data, "n", lines)
    r = _as_int(data, "r", lines)
    allowed = set(REQUIRED_KEYS) | {"name"} | {f"phi{i}" for i in range(1, n + 1)}
    for key in data:
        if key not in allowed:
            raise ProblemFileError("Unknown key", key, lines.get(key))
    for i in range(1, n + 1):
        if f"phi{i}" not in data:
            raise ProblemFileError("Missing dynamics component", f"phi{i}")

    a = _as_float(data, "a", lines)
    b = _as_float(data, "b", lines)
    if not a < b:
        raise ProblemFileError(f"Interval requires a < b, got a={a}, b={b}", "a", lines.get("a"))

    name = data.get("name", default_name)
    if not isinstance(name, str):
        raise ProblemFileError(f"Expected a string, got {name!r}", "name", lines.get("name"))

    try:
        return OCProblem(
            name=name,
            a=a,
            b=b,
            A=_as_vector(data, "A", n, lines),
            B=_as_vector(data, "B", n, lines),
            L=_as_expr(data, "L", n, r, lines),
            phi=tuple(_as_expr(data, f"phi{i}", n, r, lines) for i in range(1, n + 1)),
            n=n,
            r=r,
        )
    except InvariantError as e:
        raise ProblemFileError(str(e)) from e


def load_problem(path: Union[str, Path], name: Optional[str] = None) -> OCProblem:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    problem = parse_problem_text(text, default_name=name or path.stem)
    logger.info(f"Loaded problem '{problem.name}' (n={problem.n}, r={problem.r}) from {path}")
    return problem
