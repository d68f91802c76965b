"""Exception types raised by the file parsers."""


class FormatError(ValueError):
    """An input file does not follow its documented format."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class VecFormatError(FormatError):
    pass


class LexiconFormatError(FormatError):
    pass


class HypothesisFormatError(FormatError):
    pass


class ModelFormatError(FormatError):
    pass


class ModelVersionError(ModelFormatError):
    pass
