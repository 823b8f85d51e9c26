"""
Run configuration: one JSON document with a section per component, each validated by its own form.
All problems in all sections are collected and raised together as a single ``ValidationError``.
"""
import json

from django import forms
from django.core.exceptions import NON_FIELD_ERRORS, ValidationError
from django.utils.translation import gettext_lazy as _

from ..dataset import LIGHTING_CASES
from ..encodings import HashGridConfig
from ..exceptions import ContractError
from ..fields.vanilla import VanillaField
from ..preprocess import ChromaKeyConfig
from ..renderer import RenderConfig
from ..settings import FIELD_KINDS
from ..trainer import TrainConfig
from ..validators import GreaterThanValidator, LessThanValidator, PowerOfTwoValidator
from .fields import ColorField, IndexListField, NumberListField


__all__ = (
    "SectionForm",
    "TrainConfigForm",
    "RenderConfigForm",
    "HashGridConfigForm",
    "ChromaKeyConfigForm",
    "SynthConfigForm",
    "FieldConfigForm",
    "RunConfig",
    "SECTION_FORMS",
    "parse_override",
)


class SectionForm(forms.Form):
    """
    Every field is optional; absent keys fall back to the defaults of the component being configured.
    Once the fields are clean, ``build`` constructs that component so its own preconditions are checked too.
    """

    def build(self, options):
        return options

    @property
    def options(self):
        return {name: value for name, value in self.cleaned_data.items() if value not in (None, "")}

    def clean(self):
        cleaned_data = super().clean()
        if not self._errors:
            try:
                self.build(self.options)
            except (ContractError, TypeError) as exc:
                raise ValidationError(str(exc), code="invalid")
        return cleaned_data


class TrainConfigForm(SectionForm):
    max_steps = forms.IntegerField(required=False, min_value=0)
    rays_per_batch = forms.IntegerField(required=False, min_value=1)
    learning_rate = forms.FloatField(required=False, validators=[GreaterThanValidator(0)])
    lr_decay = forms.FloatField(required=False, max_value=1, validators=[GreaterThanValidator(0)])
    eval_every = forms.IntegerField(required=False, min_value=1)
    holdout_fraction = forms.FloatField(required=False, min_value=0, validators=[LessThanValidator(1)])
    holdout = IndexListField(required=False)
    seed = forms.IntegerField(required=False, min_value=0)
    background_rgb = ColorField(required=False)
    samples_per_ray = forms.IntegerField(required=False, min_value=2)
    stratified_jitter = forms.NullBooleanField(required=False)
    plateau_threshold = forms.FloatField(required=False, min_value=0)
    plateau_patience = forms.IntegerField(required=False, min_value=1)

    def build(self, options):
        return TrainConfig(**options)


class RenderConfigForm(SectionForm):
    samples_per_ray = forms.IntegerField(required=False, min_value=2)
    background_rgb = ColorField(required=False)
    stratified_jitter = forms.NullBooleanField(required=False)
    rng_seed = forms.IntegerField(required=False, min_value=0)
    width = forms.IntegerField(required=False, min_value=1)
    height = forms.IntegerField(required=False, min_value=1)
    time = forms.FloatField(required=False, min_value=0, max_value=1)
    grid_step = forms.FloatField(required=False, validators=[GreaterThanValidator(0)])

    render_keys = ("samples_per_ray", "background_rgb", "stratified_jitter", "rng_seed")

    def build(self, options):
        return RenderConfig(**{key: value for key, value in options.items() if key in self.render_keys})


class HashGridConfigForm(SectionForm):
    levels = forms.IntegerField(required=False, min_value=1)
    table_size = forms.IntegerField(required=False, validators=[PowerOfTwoValidator(2)])
    features_per_level = forms.IntegerField(required=False, min_value=1)
    base_resolution = forms.IntegerField(required=False, min_value=1)
    per_level_scale = forms.FloatField(required=False, validators=[GreaterThanValidator(1)])
    finest_resolution = forms.IntegerField(required=False, min_value=2)

    def build(self, options):
        return HashGridConfig.default(**options)


class ChromaKeyConfigForm(SectionForm):
    key_hue = forms.FloatField(required=False, min_value=0, validators=[LessThanValidator(360)])
    hue_tolerance = forms.FloatField(required=False, validators=[GreaterThanValidator(0)])
    min_saturation = forms.FloatField(required=False, min_value=0, max_value=1)
    min_value = forms.FloatField(required=False, min_value=0, max_value=1)
    despill_strength = forms.FloatField(required=False, min_value=0, max_value=1)
    feather_radius = forms.IntegerField(required=False, min_value=0)

    def build(self, options):
        return ChromaKeyConfig.default(**options)


class SynthConfigForm(SectionForm):
    case = forms.ChoiceField(required=False, choices=[(name, name) for name in LIGHTING_CASES])
    views = forms.IntegerField(required=False, min_value=2)
    radius = forms.FloatField(required=False, validators=[GreaterThanValidator(0)])
    camera_height = forms.FloatField(required=False)
    lighting = forms.FloatField(required=False, max_value=1, validators=[GreaterThanValidator(0)])
    spin = forms.FloatField(required=False)
    fps = forms.FloatField(required=False, validators=[GreaterThanValidator(0)])
    frames = forms.IntegerField(required=False, min_value=2)
    width = forms.IntegerField(required=False, min_value=1)
    height = forms.IntegerField(required=False, min_value=1)
    fov = forms.FloatField(required=False, validators=[GreaterThanValidator(0), LessThanValidator(180)])
    samples = forms.IntegerField(required=False, min_value=2)
    seed = forms.IntegerField(required=False, min_value=0)
    aabb_scale = forms.FloatField(required=False, validators=[GreaterThanValidator(0)])
    green_screen = forms.NullBooleanField(required=False)
    shadow = forms.FloatField(required=False, min_value=0, validators=[LessThanValidator(1)])
    density = forms.FloatField(required=False, min_value=0)


class FieldConfigForm(SectionForm):
    kind = forms.ChoiceField(required=False, choices=[])
    hidden = NumberListField(required=False)
    depth = forms.IntegerField(required=False, min_value=1)
    width = forms.IntegerField(required=False, min_value=1)
    skip_layer = forms.IntegerField(required=False, min_value=1)
    position_frequencies = forms.IntegerField(required=False, min_value=0)
    direction_frequencies = forms.IntegerField(required=False, min_value=0)
    time_frequencies = forms.IntegerField(required=False, min_value=0)
    canonical = forms.ChoiceField(required=False, choices=[])

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        # kinds are a setting, so the choices are read per form
        self.fields["kind"].choices = [(kind, kind) for kind in FIELD_KINDS]
        self.fields["canonical"].choices = [(kind, kind) for kind in FIELD_KINDS]

    def clean_hidden(self):
        hidden = self.cleaned_data["hidden"]
        if hidden is not None:
            if not hidden or any(width < 1 or width != int(width) for width in hidden):
                raise ValidationError(_("Hidden widths must be positive integers."), code="invalid")
            hidden = [int(width) for width in hidden]
        return hidden

    def clean(self):
        cleaned_data = super().clean()
        skip, depth = cleaned_data.get("skip_layer"), cleaned_data.get("depth")
        if skip is not None and skip > (depth or VanillaField.default_depth):
            self.add_error(
                "skip_layer",
                ValidationError(
                    _("The skip connection must re-enter at or before the last trunk layer (%(depth)s)."),
                    code="skip_beyond_trunk",
                    params={"depth": depth or VanillaField.default_depth},
                ),
            )
        return cleaned_data


SECTION_FORMS = {
    "train": TrainConfigForm,
    "render": RenderConfigForm,
    "hash_grid": HashGridConfigForm,
    "chroma": ChromaKeyConfigForm,
    "synth": SynthConfigForm,
    "field": FieldConfigForm,
}


def parse_override(text):
    """
    ``"section.key=value"`` to ``(section, key, value)``; the value is read as JSON when possible.
    """
    path, sep, raw = text.partition("=")
    section, dot, key = path.strip().partition(".")
    if not (sep and dot and section and key):
        raise ValidationError(
            _("Override %(value)s is not of the form section.key=value."),
            code="invalid_override",
            params={"value": text},
        )
    try:
        value = json.loads(raw)
    except ValueError:
        value = raw
    return section, key.strip(), value


class RunConfig:
    """
    Validated configuration sections as plain dicts of the keys that were actually given.
    """

    def __init__(self, sections=None):
        sections = sections or {}
        self.sections = {name: dict(sections.get(name, {})) for name in SECTION_FORMS}

    def __getitem__(self, section):
        return self.sections[section]

    def get(self, section, key, default=None):
        return self.sections[section].get(key, default)

    @classmethod
    def from_dict(cls, data, overrides=()):
        errors = {}
        merged = {}
        for name, section in (data or {}).items():
            if name not in SECTION_FORMS:
                errors[name] = [ValidationError(_("Unknown config section."), code="unknown_section")]
            elif not isinstance(section, dict):
                errors[name] = [ValidationError(_("A config section must be an object."), code="invalid")]
            else:
                merged[name] = dict(section)
        for override in overrides:
            try:
                section, key, value = parse_override(override) if isinstance(override, str) else override
            except ValidationError as exc:
                errors.setdefault("overrides", []).append(exc)
                continue
            if section not in SECTION_FORMS:
                errors[section] = [ValidationError(_("Unknown config section."), code="unknown_section")]
                continue
            merged.setdefault(section, {})[key] = value

        cleaned = {}
        for name, form_class in SECTION_FORMS.items():
            section = merged.get(name, {})
            form = form_class(section)
            for key in sorted(set(section) - set(form.fields)):
                errors["%s.%s" % (name, key)] = [ValidationError(_("Unknown setting."), code="unknown")]
            if form.is_valid():
                cleaned[name] = form.options
                continue
            for field, field_errors in form.errors.as_data().items():
                key = name if field == NON_FIELD_ERRORS else "%s.%s" % (name, field)
                errors.setdefault(key, []).extend(field_errors)
        if errors:
            raise ValidationError(errors)
        return cls(cleaned)

    @classmethod
    def load(cls, path=None, overrides=()):
        data = {}
        if path:
            try:
                with open(path, encoding="utf-8") as stream:
                    data = json.load(stream)
            except OSError as exc:
                raise ValidationError({"config": [ValidationError(str(exc), code="missing")]})
            except ValueError as exc:
                raise ValidationError({"config": [ValidationError(str(exc), code="invalid_json")]})
            if not isinstance(data, dict):
                raise ValidationError({"config": [ValidationError(_("Top level must be an object."), code="invalid")]})
        return cls.from_dict(data, overrides)

    def train_config(self, kind, **overrides):
        options = dict(self.sections["train"])
        options.update(overrides)
        return TrainConfig.for_kind(kind, **options)

    def render_config(self, **overrides):
        options = {key: value for key, value in self.sections["render"].items() if key in RenderConfigForm.render_keys}
        options.update(overrides)
        return RenderConfig(**options)

    def chroma_config(self):
        return ChromaKeyConfig.default(**self.sections["chroma"])

    def field_options(self, kind):
        """
        Constructor options for a field of ``kind``; the ``hash_grid`` section reaches the hash-encoded field,
        directly or as the canonical field of a deformation field.
        """
        options = {key: value for key, value in self.sections["field"].items() if key != "kind"}
        grid = self.sections["hash_grid"]
        field_class = FIELD_KINDS.get(kind, "")
        if field_class.endswith("DeformationField"):
            canonical = options.get("canonical", "instant")
            nested = {}
            for key in ("hidden", "direction_frequencies"):
                if key in options:
                    nested[key] = options.pop(key)
            if grid and FIELD_KINDS.get(canonical, "").endswith("InstantField"):
                nested["hash_grid"] = HashGridConfig.default(**grid)
            if nested:
                options["canonical_options"] = nested
            options.pop("skip_layer", None)
        elif field_class.endswith("InstantField"):
            options = {key: value for key, value in options.items() if key in ("hidden", "direction_frequencies")}
            if grid:
                options["hash_grid"] = HashGridConfig.default(**grid)
        else:
            options.pop("canonical", None)
            options.pop("hidden", None)
            options.pop("time_frequencies", None)
        return options
