class NotApplicable(Exception):
    """A KPI cannot be computed from the available inputs.

    The message is the human-readable reason that ends up in the report.
    """

    @property
    def reason(self) -> str:
        return str(self.args[0]) if self.args else "not applicable"
