from __future__ import annotations


class CdlGenError(Exception):
    """Root of every error raised by cdlgen."""


class ConfigError(CdlGenError):
    """Raised when a config or task file is malformed or violates an invariant."""


class TaskDefinitionError(ConfigError):
    """Raised when a reference task file is inconsistent."""


# --- Modelica source -------------------------------------------------------


class ModelicaParseError(CdlGenError):
    """Base for failures locating a problem in Modelica source."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None) -> None:
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{where}")


class ModelicaSyntaxError(ModelicaParseError):
    """Raised when source does not match the supported grammar."""

    def __init__(
        self,
        message: str,
        line: int | None = None,
        column: int | None = None,
        expected: frozenset[str] = frozenset(),
    ) -> None:
        self.expected = expected
        super().__init__(message, line, column)


class UnsupportedConstruct(ModelicaParseError):
    """Raised for valid Modelica that lies outside the CDL subset."""

    def __init__(self, construct: str, line: int | None = None, column: int | None = None) -> None:
        self.construct = construct
        super().__init__(f"unsupported construct '{construct}'", line, column)


# --- Library index ---------------------------------------------------------


class EmptyIndex(CdlGenError):
    """Raised when a library root yields no parseable classes."""

    def __init__(self, root: str) -> None:
        self.root = root
        super().__init__(f"no library classes found under {root}")


class NotFound(CdlGenError):
    """Raised when a hard-rule lookup has no exact match."""

    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"no library class named '{name}'")


# --- Prompts ---------------------------------------------------------------


class MissingPlaceholder(CdlGenError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"missing value for placeholder '{name}'")


class ExtraPlaceholder(CdlGenError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"value given for unknown placeholder '{name}'")


# --- Gateway ---------------------------------------------------------------


class GatewayError(CdlGenError):
    """Base for failures obtaining a chat completion."""


class ReplayMiss(GatewayError):
    def __init__(self, request_key: str) -> None:
        self.request_key = request_key
        super().__init__(f"cassette has no record for request {request_key}")


class ProviderError(GatewayError):
    def __init__(self, status: int, excerpt: str) -> None:
        self.status = status
        self.excerpt = excerpt
        super().__init__(f"provider returned status {status}: {excerpt}")


class GatewayTimeout(GatewayError):
    def __init__(self, seconds: float) -> None:
        self.seconds = seconds
        super().__init__(f"provider did not answer within {seconds} s")


class EmptyCode(GatewayError):
    """Raised when a response carries no code."""

    def __init__(self) -> None:
        super().__init__("response contains no code")


# --- Simulation ------------------------------------------------------------


class ElaborationError(CdlGenError):
    """Base for failures turning a block into an executable network."""


class UnknownBehavior(ElaborationError):
    def __init__(self, fqn: str) -> None:
        self.fqn = fqn
        super().__init__(f"no registered behavior for class {fqn}")


class UnresolvedPort(ElaborationError):
    def __init__(self, path: str, reason: str = "does not resolve") -> None:
        self.path = path
        super().__init__(f"port {path} {reason}")


class ConflictingConnection(ElaborationError):
    def __init__(self, path: str) -> None:
        self.path = path
        super().__init__(f"port {path} is driven by more than one source")


class AlgebraicLoop(ElaborationError):
    def __init__(self, instances: list[str]) -> None:
        self.instances = instances
        super().__init__(f"algebraic loop through {', '.join(instances)}")


class InvalidParameter(ElaborationError):
    def __init__(self, instance: str, name: str, value: str) -> None:
        self.instance = instance
        self.name = name
        self.value = value
        super().__init__(f"cannot evaluate parameter {instance}.{name}={value}")


class SimulationError(CdlGenError):
    """Base for failures while stepping a network."""


class KindMismatch(SimulationError):
    def __init__(self, port: str, expected: str) -> None:
        self.port = port
        self.expected = expected
        super().__init__(f"input series for {port} is not {expected}")


class InvalidTrace(SimulationError):
    """Raised when input series or step settings violate simulate preconditions."""


class UnknownPort(SimulationError):
    def __init__(self, path: str) -> None:
        self.path = path
        super().__init__(f"trace has no port {path}")


# --- Validation ------------------------------------------------------------


class NotInjectable(CdlGenError):
    def __init__(self, fault: str, reason: str) -> None:
        self.fault = fault
        super().__init__(f"cannot inject {fault}: {reason}")


# --- Orchestration ---------------------------------------------------------


class NoModulesSelected(CdlGenError):
    def __init__(self, names: list[str]) -> None:
        self.names = names
        super().__init__(f"none of the selected names resolve: {', '.join(names) or '(empty reply)'}")


class ToolchainUnavailable(CdlGenError):
    def __init__(self, command: str) -> None:
        self.command = command
        super().__init__(f"toolchain command '{command}' not found")


# --- Evaluation ------------------------------------------------------------


class FormInvalid(CdlGenError):
    def __init__(self, field: str, reason: str = "missing or contradictory") -> None:
        self.field = field
        super().__init__(f"form field {field}: {reason}")


class UnparseableVerdict(CdlGenError):
    def __init__(self, reply: str) -> None:
        self.reply = reply
        super().__init__(f"evaluator reply is neither yes nor no: {reply[:80]!r}")
