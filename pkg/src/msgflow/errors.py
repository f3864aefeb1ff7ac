"""Exception hierarchy shared by every stage of the miner."""


class MsgflowError(Exception):
    """Base class for all errors raised by msgflow."""


class ParseError(MsgflowError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class EmptyDictionaryError(ParseError):
    pass


class DuplicateMessageError(ParseError):
    pass


class UndefinedMessageError(ParseError):
    """A trace or directive refers to a message id that was never declared."""


class EmptyModelError(MsgflowError):
    """Nothing left to build a model from (no roots observed, or no paths)."""


class OverPrunedError(MsgflowError):
    """Pruning disconnected every root from every terminal."""
