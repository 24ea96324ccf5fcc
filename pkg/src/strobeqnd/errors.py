class ConfigError(ValueError):
    """Invalid configuration.  ``issues`` holds ``(field_path, message)`` pairs."""

    def __init__(self, issues):
        if isinstance(issues, str):
            issues = [("", issues)]
        self.issues = list(issues)
        super().__init__("; ".join(f"{p}: {m}" if p else m for p, m in self.issues))


class NumericalError(RuntimeError):
    """A numerical routine failed; ``module`` names the component that failed."""

    def __init__(self, module, message):
        self.module = module
        super().__init__(f"[{module}] {message}")
