"""Exception type shared by every pipeline stage."""


class PipelineError(ValueError):
    """A domain error carrying a stable, machine-readable ``code``.

    Extra keyword arguments (line numbers, hour indices, epochs...) are kept
    in ``details`` so the CLI can serialize them verbatim.
    """

    def __init__(self, code, message=None, **details):
        self.code = code
        self.details = details
        super().__init__(message or code)

    def to_dict(self):
        out = {"error": self.code, "message": str(self)}
        out.update({k: _jsonable(v) for k, v in self.details.items()})
        return out


def _jsonable(value):
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return str(value)
