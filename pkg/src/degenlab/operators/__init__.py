from .families import (AffineSource, Control, Family, OperatorSpec, UpwindGradient,
                       drift_coefficient, drift_field, eval_operator, evaluate, make_operator)
from .conditions import (Condition, ConditionReport, Verdict, check_f3, check_f4,
                         f6_constants, f6_report, lemma_f5_constants)

__all__ = [
    "AffineSource", "Control", "Family", "OperatorSpec", "UpwindGradient", "drift_coefficient",
    "drift_field", "eval_operator", "evaluate", "make_operator", "Condition", "ConditionReport",
    "Verdict", "check_f3", "check_f4", "f6_constants", "f6_report", "lemma_f5_constants",
]
