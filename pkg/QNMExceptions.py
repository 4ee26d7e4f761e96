"""
QNMExceptions — exception hierarchy for qnmlab.

Library code raises one of these instead of returning sentinel values.
Diagnostic operations (check_correctness, residual reports) never raise on a
broken scheme; they report the residual and let the caller decide.

Usage:
    from QNMExceptions import QNMError, LayoutError, ConfigError

    try:
        rho = partial_trace(state, ["Z"])
    except LayoutError as e:
        print(f"bad register: {e.field}")
    except QNMError:
        # Catch-all for any qnmlab error
        ...

Every exception carries an exit_code; the CLI exits with it so that a
malformed config (2), an unknown experiment (3) and an incompatible
scheme/attack pairing (4) are distinguishable from a failed verdict (1).
"""


class QNMError(Exception):
    """
    Base class for all qnmlab errors.

    Attributes:
        message:   Human-readable description.
        field:     Name of the offending register, parameter or config key ("" if n/a).
        exit_code: Process exit code the CLI uses for this error.
    """

    exit_code = 1

    def __init__(self, message: str, field: str = "", exit_code: int | None = None):
        super().__init__(message)
        self.message = message
        self.field   = field
        if exit_code is not None:
            self.exit_code = exit_code

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.message!r}, field={self.field!r})"


class LayoutError(QNMError):
    """
    Raised when register labels are duplicated, unknown, or dims disagree.

    Example:
        except LayoutError as e:
            print(f"register {e.field!r} not in layout")
    """


class StateError(QNMError):
    """
    Raised when a matrix is not a valid density operator (non-Hermitian,
    trace != 1, negative eigenvalues) or an entropy is asked of one.

    Example:
        try:
            rho = DensityOperator(m, layout)
        except StateError as e:
            print(e.message)
    """


class ChannelError(QNMError):
    """
    Raised on a non-CP Choi matrix, missing Kraus form, or a composition
    whose layouts do not chain.
    """


class DesignError(QNMError):
    """
    Raised for unsupported design requests: t > 2 deficiencies, Clifford
    enumeration beyond two qubits, non-unitary ensemble elements.

    Example:
        try:
            clifford_group(3)
        except DesignError:
            ens = random_clifford(3, 2000, seed=7)
    """


class SchemeError(QNMError):
    """
    Raised when a scheme cannot be built: tag dims that do not divide the
    plaintext, odd Werner-Holevo dimension, bad key weights.
    """


class DecompositionError(SchemeError):
    """
    Raised when an encryption map is not of the form V((.) ⊗ σ)V†.
    Signals a broken scheme.

    Attributes:
        residual: Reconstruction or isometry defect that triggered the error.
    """

    def __init__(self, message: str, residual: float = float("nan"), **kwargs):
        super().__init__(message, **kwargs)
        self.residual = residual


class ConfigError(QNMError):
    """
    Raised on a malformed experiment config. `field` names the bad key.

    Example:
        except ConfigError as e:
            click.echo(f"config error in {e.field}: {e.message}", err=True)
            sys.exit(e.exit_code)
    """

    exit_code = 2


class UnknownExperimentError(QNMError):
    """Raised when a config names an experiment that is not registered."""

    exit_code = 3


class IncompatibleScenarioError(QNMError):
    """
    Raised when a scheme and an attack cannot be combined (ciphertext or
    side-information dims disagree, or an experiment does not accept the
    requested scheme kind).
    """

    exit_code = 4
