"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Input shapes do not fit the requested operation."""


class SpecError(ValueError):
    """Invalid image-class specification.

    Carries one diagnostic string per problem, each prefixed with the
    location inside the spec document (e.g. ``classes[0].features[1]``).
    """

    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class FileFormatError(ValueError):
    """A data file is corrupt, truncated, or has an unsupported version."""


class GenerationError(RuntimeError):
    """Sample generation exhausted its retry budget."""
