"""Exception types shared across modules."""


class InputError(Exception):
    """Input data is missing, empty or malformed."""


class MissingLambdaError(LookupError):
    """A moment constant needed by an estimator is not available in the table."""

    def __init__(self, r, m, detail: str = ""):
        self.r = r
        self.m = m
        msg = f"no lambda entry for r={r}, m={m}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)

    def __str__(self) -> str:
        return self.args[0]


class TablePersistenceError(OSError):
    """Reading or writing a lambda cache file failed."""
