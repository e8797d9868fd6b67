"""Exception types shared across the package."""


class NumericError(ArithmeticError):
    """A computation left the representable range or lost structural validity.

    Carries optional diagnostics: ``norm`` (the offending matrix norm for
    exponential overflow) and ``residue`` (relative imaginary residue when a
    nominally real result came back complex).
    """

    def __init__(self, message, *, norm=None, residue=None):
        super().__init__(message)
        self.norm = norm
        self.residue = residue


class ConfigError(ValueError):
    """A configuration file failed to parse or validate.

    ``lineno`` is 1-based; 0 means the error is not tied to a single line.
    """

    def __init__(self, message, lineno=0):
        super().__init__(message)
        self.lineno = lineno

    def __str__(self):
        base = super().__str__()
        if self.lineno:
            return f"line {self.lineno}: {base}"
        return base
