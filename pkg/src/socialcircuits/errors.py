"""Exception hierarchy shared by every module."""


class CircuitError(Exception):
    """Base class for all package errors."""


class InputError(CircuitError):
    """Bad user input; the CLI maps these to exit code 2."""


class ParseError(InputError):
    pass


class EmptyEvent(ParseError):
    pass


class DuplicateId(ParseError):
    pass


class UnknownIndividual(InputError, KeyError):
    pass


class EmptySeries(InputError):
    pass


class ExhaustiveTooLarge(InputError):
    pass


class NoObservations(CircuitError):
    """N(i) == 0, so the edge is undefined."""


class MissingSeedSeries(InputError):
    pass


class RosterMismatch(InputError):
    pass


class ConfigError(InputError):
    pass
