"""Exception hierarchy.

Every error carries a ``category`` used by the CLI to pick an exit code:
``usage`` (2), ``data`` (3) or ``numerical`` (4).
"""

EXIT_CODES = {"usage": 2, "data": 3, "numerical": 4}


class PdslaError(Exception):
    category = "numerical"

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.category]


class UsageError(PdslaError, ValueError):
    category = "usage"


class DimensionMismatch(PdslaError, ValueError):
    category = "data"


class DomainError(PdslaError, ValueError):
    category = "usage"


class RankDeficient(PdslaError):
    pass


class DegenerateDenominator(PdslaError):
    pass


class NonConvergence(PdslaError):
    pass


class AllViolateBound(PdslaError):
    """Every lambda on the grid selects more than ``c * T`` variables."""


class InsufficientDof(PdslaError):
    pass


class ExplosiveDgp(PdslaError):
    pass


class TooShortSample(PdslaError):
    category = "data"


class UnknownVariable(PdslaError, KeyError):
    category = "data"

    def __init__(self, name, available=()):
        self.name = name
        self.available = list(available)
        msg = f"unknown variable {name!r}"
        if self.available:
            msg += "; available: " + ", ".join(map(str, self.available))
        super().__init__(msg)

    def __str__(self) -> str:
        return self.args[0]


class ParseError(PdslaError, ValueError):
    category = "data"


class MissingDataUnderFailPolicy(PdslaError, ValueError):
    category = "data"


class NonPositiveUnderLog(PdslaError, ValueError):
    category = "data"
