"""Exception taxonomy shared across the package.

Every failure mode raised by library code derives from ShiftLabError so
callers (and the CLI) can distinguish domain errors from genuine bugs.
"""


class ShiftLabError(Exception):
    """Base class for all shiftlab domain errors."""


class EmptySft(ShiftLabError):
    """Pruning stranded symbols removed the whole alphabet."""


class NonConvergence(ShiftLabError):
    """An iterative solver failed to converge within its iteration cap."""


class NotTransitive(ShiftLabError):
    """Operation requires a transitive (strongly connected) shift."""


class NotErgodic(ShiftLabError):
    """Operation requires an ergodic measure."""


class OrderMismatch(ShiftLabError):
    """Function and measure could not be recoded to a common order."""


class AlphabetMismatch(ShiftLabError):
    """Two symbolic objects live over different alphabets."""


class LevelOutOfRange(ShiftLabError):
    """Requested Birkhoff level lies outside the attainable interval."""


class SupportMismatch(ShiftLabError):
    """A measure puts positive mass on words the shift forbids."""


class BadSchedule(ShiftLabError):
    """Block schedule would produce convergent averages."""


class BudgetExceeded(ShiftLabError):
    """Exact enumeration would exceed the configured budget."""


class GridTooCoarse(ShiftLabError):
    """Initial-condition grid cannot resolve the requested separation scale."""


class HitSingularLine(ShiftLabError):
    """Poincare orbit landed on the singular line to machine precision."""


class ParamOutOfRange(ShiftLabError):
    """Model parameters violate a defining clause (named in the message)."""


class NotBranchConstant(ShiftLabError):
    """Observable is not constant on each branch of the quotient map."""


class Infeasible(ShiftLabError):
    """No admissible measure satisfies the requested constraints."""


class InconsistentMarginals(ShiftLabError):
    """Cylinder frequency tables are not shift-consistent."""


class AmbientNotTransitive(ShiftLabError):
    """Construction requires a transitive ambient shift."""


class NoBridge(ShiftLabError):
    """No connecting word exists inside the ambient shift."""


class UnderflowDepth(ShiftLabError):
    """Requested cylinder depth is below floating-point resolution."""


class ConfigInvalid(ShiftLabError):
    """Experiment config failed schema validation.

    The message carries a JSON-pointer to the offending field.
    """

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}")


class GateFailed(ShiftLabError):
    """A declared acceptance gate failed during an experiment run."""


class SchemaMismatch(ShiftLabError):
    """A CSV/JSON artifact does not match the documented schema."""
