from typing import Iterable, Optional


class KGQAError(Exception):
    """Base class for every failure raised by the pipeline."""


# rdf-core


class RdfSyntaxError(KGQAError):
    def __init__(self, message: str, line: int, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{message} ({where})")


# sparql


class SparqlError(KGQAError):
    kind = "syntax"


class SparqlSyntaxError(SparqlError):
    kind = "syntax"

    def __init__(self, position: int, expected: Iterable[str], message: str = ""):
        self.position = position
        self.expected = sorted(set(expected))
        detail = message or f"expected one of {self.expected}"
        super().__init__(f"syntax error at position {position}: {detail}")


class UnboundVariable(SparqlError):
    kind = "binding"

    def __init__(self, variable: str, detail: str = "does not occur in the pattern"):
        self.variable = variable
        super().__init__(f"variable ?{variable} {detail}")


class UndefinedPrefix(SparqlError):
    kind = "prefix"

    def __init__(self, prefix: str, line: Optional[int] = None):
        self.prefix = prefix
        self.line = line
        where = "" if line is None else f" (line {line})"
        super().__init__(f"undefined prefix '{prefix}:'{where}")


# query-exec


class GuardExceeded(KGQAError):
    pass


class EndpointError(KGQAError):
    def __init__(self, endpoint: str, message: str):
        self.endpoint = endpoint
        super().__init__(f"{endpoint}: {message}")


class NetworkError(EndpointError):
    pass


class ProtocolError(EndpointError):
    def __init__(self, endpoint: str, message: str, status: Optional[int] = None):
        self.status = status
        super().__init__(endpoint, message)


# llm-backend


class BackendUnavailable(KGQAError):
    pass


class BudgetExceeded(KGQAError):
    pass


# nlu-subgoal


class EmptyQuestion(KGQAError):
    pass


class ClarificationLoopExceeded(KGQAError):
    pass


# allocator


class RegistryError(KGQAError):
    pass


class DuplicateGraphId(RegistryError):
    pass


class UnknownGraph(RegistryError):
    pass


class NoViableGraph(KGQAError):
    pass


# synthesizer


class SynthesisError(KGQAError):
    pass


class NoTemplate(SynthesisError):
    pass


class UngroundableSlot(SynthesisError):
    def __init__(self, slot: str, mention: Optional[str]):
        self.slot = slot
        self.mention = mention
        super().__init__(f"cannot ground slot {{{slot}}} (mention: {mention!r})")


class IncompatibleTyping(SynthesisError):
    def __init__(self, predicate: str, subject_class: str, domain: Iterable[str]):
        self.predicate = predicate
        self.subject_class = subject_class
        self.domain = sorted(domain)
        super().__init__(
            f"<{predicate}> expects a subject in {self.domain}, got <{subject_class}>"
        )


class Unrepairable(SynthesisError):
    def __init__(self, rule: str, reason: str):
        self.rule = rule
        self.reason = reason
        super().__init__(f"{rule}: {reason}")


# verifier


class NoPerturbableSite(KGQAError):
    pass


# orchestrator


class ClarificationNeeded(KGQAError):
    def __init__(self, request, trace=None):
        self.request = request
        self.trace = trace
        super().__init__(request.question)


class AllSubgoalsFailed(KGQAError):
    def __init__(self, message: str = "every subgoal failed", trace=None):
        self.trace = trace
        super().__init__(message)


class ConfigError(KGQAError):
    pass


# benchmark


class CorpusError(KGQAError):
    def __init__(self, message: str, item_id: Optional[str] = None):
        self.item_id = item_id
        prefix = "" if item_id is None else f"item {item_id}: "
        super().__init__(prefix + message)
