"""Exception hierarchy.

Every exception carries a stable ``code`` string that the command line
front end copies into error reports.
"""


class AssayRiskError(ValueError):
    code = "ERROR"


class DomainError(AssayRiskError):
    code = "DOMAIN"


class DegenerateVarianceError(AssayRiskError):
    code = "DEGENERATE_VARIANCE"


class UnbalancedDesignError(AssayRiskError):
    code = "UNBALANCED_DESIGN"


class DesignError(AssayRiskError):
    """Too few series, unidentifiable components and similar layout problems."""

    code = "INVALID_DESIGN"


class ComplexityError(AssayRiskError):
    code = "COMPLEXITY"


class UnreachableTargetError(AssayRiskError):
    code = "UNREACHABLE_TARGET"


class LambdaMismatchError(AssayRiskError):
    code = "LAMBDA_MISMATCH"


class RuleSyntaxError(AssayRiskError):
    code = "RULE_SYNTAX"


class DatasetFormatError(AssayRiskError):
    code = "DATASET_FORMAT"
