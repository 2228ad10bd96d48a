"""Exception types raised by scalekit."""


class ScaleKitError(Exception):
    """Base class for all scalekit errors."""


class ModelError(ScaleKitError, ValueError):
    """A model's parameters violate its invariants."""


class RootBracketError(ScaleKitError, ArithmeticError):
    """Bracketing a root of the Laplace exponent failed."""


class QuadratureError(ScaleKitError, ArithmeticError):
    """A quadrature produced a non-finite value.

    The offending abscissa is kept in ``abscissa``.
    """

    def __init__(self, message, abscissa=None):
        super().__init__(message)
        self.abscissa = abscissa


class InversionError(ScaleKitError, ArithmeticError):
    """Numerical Laplace inversion failed its a posteriori error check."""


class GridError(ScaleKitError, ValueError):
    """A grid is non-monotone, or lies outside the state space."""


class DegenerateWindowError(ScaleKitError, ArithmeticError):
    """W(a, b) vanishes, so the exit window carries no information."""


class ConfigError(ScaleKitError, ValueError):
    """A run configuration is malformed.

    ``field`` is the dotted path of the offending entry and ``line`` its
    1-based line in the config file, when known.
    """

    def __init__(self, message, field=None, line=None):
        where = []
        if field:
            where.append(field)
        if line is not None:
            where.append(f"line {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line
