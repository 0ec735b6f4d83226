"""Exception hierarchy shared across the package.

``InputError`` marks problems a caller can fix (bad files, bad configuration,
infeasible requests); the CLI maps it to exit code 2.  Everything else derived
from ``RhtpError`` is treated as an internal/runtime failure (exit code 1).
"""


class RhtpError(Exception):
    """Base class for all errors raised by this package."""


class InputError(RhtpError):
    """Invalid user input: malformed files, bad parameters, impossible requests."""


class SceneFormatError(InputError):
    """Scene JSON could not be parsed or is missing required fields."""


class SceneValidationError(InputError, ValueError):
    """Scene parsed fine but violates a semantic constraint (names the field).

    Also a ValueError so that misusing a value-object constructor directly
    (negative radius, degenerate rectangle, ...) fails the way callers expect.
    """


class GenerationError(InputError):
    """Random scene generation cannot satisfy the requested geometry."""


class ContainmentError(InputError):
    """A target's manipulation annuli are not contained in its observation annulus."""


class ObservationError(RhtpError):
    """An observed manipulation point lies outside its target region."""


class EmptyTaskSpaceError(RhtpError):
    """No cell of the base grid can reach any target: nothing to plan."""


class InfeasibleCoverageError(RhtpError):
    """Some targets cannot reach the success threshold even using every region."""

    def __init__(self, targets):
        self.targets = tuple(targets)
        super().__init__(
            "coverage threshold unreachable for target indices "
            + ", ".join(str(t) for t in self.targets)
        )


class SolverLimitError(RhtpError):
    """Branch-and-bound exceeded its node budget."""
