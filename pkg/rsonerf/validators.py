from django.core.exceptions import ValidationError
from django.core.validators import BaseValidator
from django.utils.translation import gettext_lazy as _


__all__ = (
    "GreaterThanValidator",
    "LessThanValidator",
    "PowerOfTwoValidator",
    "UnitIntervalValidator",
    "ChannelCountValidator",
)


class GreaterThanValidator(BaseValidator):
    message = _("Ensure this value is greater than %(limit_value)s.")
    code = "greater_than"

    def compare(self, a, b):
        return a <= b


class LessThanValidator(BaseValidator):
    message = _("Ensure this value is less than %(limit_value)s.")
    code = "less_than"

    def compare(self, a, b):
        return a >= b


class PowerOfTwoValidator(BaseValidator):
    """
    ``limit_value`` is the smallest accepted power of two.
    """

    message = _("Ensure this value is a power of two no smaller than %(limit_value)s.")
    code = "power_of_two"

    def __init__(self, limit_value=1, message=None):
        super().__init__(limit_value, message)

    def compare(self, a, b):
        return a < b or a & (a - 1) != 0


class UnitIntervalValidator:
    """
    Every component of a scalar or sequence lies in [0, 1].
    """

    message = _("Ensure every component lies in [0, 1], got %(value)s.")
    code = "unit_interval"

    def __call__(self, value):
        values = value if isinstance(value, (list, tuple)) else [value]
        if not all(0.0 <= v <= 1.0 for v in values):
            raise ValidationError(self.message, code=self.code, params={"value": value})

    def __eq__(self, other):
        return isinstance(other, self.__class__)


class ChannelCountValidator(BaseValidator):
    message = _("Ensure this value has exactly %(limit_value)s components (it has %(show_value)s).")
    code = "channel_count"

    def compare(self, a, b):
        return a != b

    def clean(self, x):
        return len(x)
