"""Exception hierarchy.  Every error carries a short machine-readable ``code``."""


class LambError(Exception):
    code = "LambError"


class GridError(LambError, ValueError):
    code = "GridError"


class WindowError(LambError, ValueError):
    code = "WindowError"


class NotHyperbolic(LambError):
    code = "NotHyperbolic"


class NotStationary(LambError):
    code = "NotStationary"


class CannotLocalize(LambError):
    code = "CannotLocalize"


class Diverged(LambError):
    code = "Diverged"


class BlowUp(LambError):
    code = "BlowUp"


class NoConvergence(LambError):
    code = "NoConvergence"


class InconsistentInput(LambError):
    code = "InconsistentInput"


class ConfigError(LambError, ValueError):
    code = "ConfigError"
