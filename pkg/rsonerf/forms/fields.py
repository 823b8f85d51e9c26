import json

from django.core.exceptions import ValidationError
from django.forms import Field
from django.utils.translation import gettext_lazy as _

from ..validators import ChannelCountValidator, UnitIntervalValidator


__all__ = ("NumberListField", "ColorField", "IndexListField")


class NumberListField(Field):
    """
    A list of numbers given as a JSON array or a comma separated string.
    """

    default_error_messages = {"invalid": _("Enter a list of numbers.")}
    number_type = float

    def __init__(self, length=None, **kwargs):
        self.length = length
        super().__init__(**kwargs)
        if length is not None:
            self.validators.append(ChannelCountValidator(length))

    def to_python(self, value):
        if value in self.empty_values:
            return None
        if isinstance(value, str):
            text = value.strip()
            try:
                value = json.loads(text) if text.startswith("[") else [part for part in text.split(",") if part.strip()]
            except ValueError:
                raise ValidationError(self.error_messages["invalid"], code="invalid")
        if not isinstance(value, (list, tuple)):
            raise ValidationError(self.error_messages["invalid"], code="invalid")
        try:
            return [self.number_type(item) for item in value]
        except (TypeError, ValueError):
            raise ValidationError(self.error_messages["invalid"], code="invalid")


class ColorField(NumberListField):
    def __init__(self, **kwargs):
        super().__init__(length=3, **kwargs)
        self.validators.append(UnitIntervalValidator())


class IndexListField(NumberListField):
    default_error_messages = {"invalid": _("Enter a list of frame indices.")}
    number_type = int

    def validate(self, value):
        super().validate(value)
        if value and any(index < 0 for index in value):
            raise ValidationError(_("Frame indices must be non-negative."), code="negative_index")
