"""Exception hierarchy. Every error raised on bad input derives from TiFeedError."""


class TiFeedError(Exception):
    pass


class EmptyTag(TiFeedError, ValueError):
    pass


class MalformedTag(TiFeedError, ValueError):
    pass


class MalformedEvent(TiFeedError, ValueError):
    pass


class BadTimestamp(MalformedEvent):
    pass


class DuplicateEventId(TiFeedError, ValueError):
    pass


class IoFailure(TiFeedError, OSError):
    pass


class UnknownFeed(TiFeedError, LookupError):
    pass


class UnknownCategory(TiFeedError, ValueError):
    pass


class NoPositives(TiFeedError, ValueError):
    pass


class UnknownEventId(TiFeedError, LookupError):
    pass


class UnlabeledEvent(TiFeedError, ValueError):
    pass


class EmptyCorpus(TiFeedError, ValueError):
    pass


class DegenerateVocab(TiFeedError, ValueError):
    pass


class DimMismatch(TiFeedError, ValueError):
    pass


class MalformedLine(TiFeedError, ValueError):
    pass


class MissingVector(TiFeedError, LookupError):
    pass


class UndefinedSimilarity(TiFeedError, ValueError):
    pass


class EmptyTraining(TiFeedError, ValueError):
    pass


class TooFewEvents(TiFeedError, ValueError):
    pass


class LengthMismatch(TiFeedError, ValueError):
    pass


class ConfigError(TiFeedError, ValueError):
    pass
