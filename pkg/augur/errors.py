"""
Augur - Exceptions
License: GNU GPL

Every failure the tool reports maps to one of these classes. The command line
front end turns them into exit codes: input and configuration problems exit
with 2, numerical failures with 3.
"""


class AugurError(Exception):
    """Base class for all Augur errors"""


class InputError(AugurError, ValueError):
    """Unreadable or invalid input data (files, labels, data domain)"""


class ConfigError(AugurError, ValueError):
    """Invalid configuration value or combination"""


class MetricUndefinedError(AugurError, ValueError):
    """A metric is undefined for the given counts"""


class TrainingDivergedError(AugurError, ArithmeticError):
    """Autoencoder training produced a non-finite or increasing objective"""

    def __init__(self, message, layer=None, epoch=None):
        super().__init__(message)
        self.layer = layer
        self.epoch = epoch
