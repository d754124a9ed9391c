"""Small input-validation helpers used across modules and estimators."""

from .errors import ValidationError


def check_unit_interval(value, name):
    """Require a float in [0, 1]; returns the value."""
    v = float(value)
    if not 0.0 <= v <= 1.0:
        raise ValidationError(f"{name} must be in [0, 1], got {value!r}")
    return v


def check_positive_int(value, name):
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ValidationError(f"{name} must be a positive integer, got {value!r}")
    return value


def check_choice(value, name, choices):
    if value not in choices:
        raise ValidationError(f"{name} must be one of {sorted(choices)}, got {value!r}")
    return value
