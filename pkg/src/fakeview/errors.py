"""Exception hierarchy shared by all fakeview modules."""


class FakeViewError(Exception):
    """Base class for every error raised by this package."""


class RecordParseError(FakeViewError, ValueError):
    """A log line could not be parsed.

    ``kind`` is one of ``FieldCount``, ``InvalidTimestamp``, ``InvalidIp``,
    ``EmptyVideoId``, ``InvalidToken``, ``InvalidCategory``, ``InvalidDate``.
    """

    def __init__(self, kind, message, lineno=None, field=None):
        self.kind = kind
        self.lineno = lineno
        self.field = field
        where = f"line {lineno}: " if lineno is not None else ""
        if field is not None:
            where += f"field {field}: "
        super().__init__(f"{kind}: {where}{message}")


class NotFoundError(FakeViewError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "not found"


class InvalidEntropyError(FakeViewError, ValueError):
    pass


class ConfigError(FakeViewError, ValueError):
    pass


class RateError(FakeViewError, ValueError):
    """An attack asks for more views than its method can produce."""


class TrainError(FakeViewError, ValueError):
    pass


class SchemaError(FakeViewError, ValueError):
    """Feature schema of the input does not match the model."""


class UndefinedAUCError(FakeViewError, ValueError):
    pass


class WindowError(FakeViewError, ValueError):
    """A streamed record falls outside the detector's current window."""


class LogReadError(FakeViewError, OSError):
    """I/O failure while reading a log; ``records_read`` tells how far it got."""

    def __init__(self, message, records_read=0, lines_read=0):
        self.records_read = records_read
        self.lines_read = lines_read
        super().__init__(f"{message} (after {lines_read} lines, {records_read} records)")
