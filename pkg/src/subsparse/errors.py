class InputError(ValueError):
    """Bad user input: invalid ids, malformed files, violated preconditions."""


class SubmodularityError(InputError):
    """An explicit value table failed the diminishing-returns check.

    ``triple`` holds a violating ``(A, B, v)`` with ``A ⊆ B`` and ``v ∉ B``.
    """

    def __init__(self, message, triple=None):
        super().__init__(message)
        self.triple = triple


class InvariantError(RuntimeError):
    """An internal invariant was found broken at runtime."""
