class ConfigError(ValueError):
    """Raised when a scenario or placement cannot be built from its parameters.

    ``key`` names the offending configuration entry when there is one.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
