"""Exception hierarchy.

Every error carries a short machine-readable ``code`` so the CLI can print a
single parsable line and choose an exit status.
"""


class DivattnError(Exception):
    code = "ERROR"
    exit_status = 3

    def __init__(self, message, *, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code


class InvalidInputError(DivattnError, ValueError):
    code = "INVALID_INPUT"


class ShapeError(DivattnError, ValueError):
    code = "SHAPE"


class DegenerateVectorError(DivattnError, ValueError):
    code = "DEGENERATE_VECTOR"
    exit_status = 4


class InvalidPmfError(DivattnError, ValueError):
    code = "INVALID_PMF"


class InvalidParameterError(DivattnError, ValueError):
    code = "INVALID_PARAMETER"


class InvalidLabelError(DivattnError, ValueError):
    code = "INVALID_LABEL"


class ProtocolError(DivattnError, ValueError):
    code = "PROTOCOL"


class ConfigError(DivattnError, ValueError):
    """Bad configuration; ``key`` names the offending entry."""

    code = "CONFIG"
    exit_status = 2

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class FormatError(DivattnError):
    code = "FORMAT"


class ChecksumError(FormatError):
    code = "CHECKSUM"


class ContractError(DivattnError, RuntimeError):
    code = "CONTRACT"


class NumericError(DivattnError, ArithmeticError):
    """Non-finite objective; ``group`` names the parameter group if known."""

    code = "NUMERIC"
    exit_status = 4

    def __init__(self, message, group=None):
        super().__init__(message)
        self.group = group


class DivergenceError(NumericError):
    code = "DIVERGENCE"

    def __init__(self, message, last_good=None, epoch=None):
        super().__init__(message)
        self.last_good = last_good
        self.epoch = epoch
