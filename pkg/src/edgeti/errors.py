"""Exception hierarchy shared across the fabric."""


class FabricError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(FabricError, ValueError):
    """A value violates its declared range or grammar."""


class ContractViolation(FabricError):
    """A caller broke an operation precondition (wrong device, out-of-order input)."""


class CodecError(FabricError):
    """Base for wire encoding/decoding failures."""


class DecodeError(CodecError):
    """The byte sequence is not a well-formed wire document."""


class MessageValidationError(CodecError):
    """The document parsed but the decoded value violates a type invariant."""


class KeyLookupError(FabricError, KeyError):
    """No pre-shared key is registered for the requested device."""


class TransportError(FabricError):
    """The bus rejected an operation (for example, publish on a closed bus)."""


class FilterGrammarError(FabricError, ValueError):
    """A topic filter does not satisfy the filter grammar."""


class RegistrationError(FabricError):
    """Device registry conflict."""


class StateError(FabricError):
    """An operation was applied to a device in the wrong triage state."""


class VerdictParseError(FabricError):
    """An LLM response could not be parsed into a structured verdict."""


class TransientProviderError(FabricError):
    """A retryable LLM provider failure (timeout, connection, 5xx)."""


class ScenarioError(FabricError, ValueError):
    """A scenario document failed validation."""

    def __init__(self, problems: list[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = problems
        super().__init__("; ".join(problems))
