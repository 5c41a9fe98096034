"""Built-in problems shipped with the repository."""

from pathlib import Path


PROBLEM_DIR = Path(__file__).resolve().parent.parent / "data" / "problems"

BUILTIN_PROBLEMS = {
    "baseline": "baseline.ocp",
    "lq": "lq.ocp",
    "torres-6.1": "torres_example.ocp",
}


def get_builtin_path(name: str) -> Path:
    """Return the bundled problem file for ``name``."""
    key = str(name).strip()
    if key not in BUILTIN_PROBLEMS:
        raise ValueError(f"Unknown builtin problem '{name}'. Choose from: {sorted(BUILTIN_PROBLEMS)}")
    return PROBLEM_DIR / BUILTIN_PROBLEMS[key]


if __name__ == "__main__":
    print(f"Built-in problems: {len(BUILTIN_PROBLEMS)}")
    for idx, name in enumerate(BUILTIN_PROBLEMS, 1):
        print(f"  {idx:2d}. {name:12s} {get_builtin_path(name)}")
