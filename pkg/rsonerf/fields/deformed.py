import numpy as np

from django.utils.module_loading import import_string

from ..autodiff import Tensor, add, clamp, concat, mul
from ..encodings import FrequencyEncodingConfig, freq_encode
from ..exceptions import ContractError
from ..settings import FIELD_KINDS, get_float_dtype
from .base import BaseField, init_mlp, linear_flops, run_mlp


CANONICAL_PREFIX = "canonical."


class DeformationField(BaseField):
    """
    Time-conditioned field: a deformation network maps ``(x, t)`` to a displacement and a canonical
    static field is queried at the displaced, clamped position. At ``t == 0`` the network is bypassed.
    """

    kind = "deformed"
    requires_time = True

    def __init__(self, seed=0, params=None, **options):
        self.canonical = None
        super().__init__(seed=seed, params=params, **options)
        if params is not None:
            self.canonical.params = self._canonical_params(params)

    def clean_options(self, options):
        cleaned = {
            "canonical": "instant",
            "canonical_options": {},
            "depth": 4,
            "width": 128,
            "position_frequencies": 10,
            "time_frequencies": 6,
        }
        cleaned.update(options)
        kind = cleaned["canonical"]
        if kind not in FIELD_KINDS or import_string(FIELD_KINDS[kind]).requires_time:
            raise ContractError("Canonical field must be a static field kind, got %r" % kind)
        self.canonical = import_string(FIELD_KINDS[kind])(seed=self.seed, **dict(cleaned["canonical_options"]))
        cleaned["canonical_options"] = self.canonical.config()
        return cleaned

    def deformation_sizes(self):
        position = FrequencyEncodingConfig(self.options["position_frequencies"]).output_dim(3)
        time = FrequencyEncodingConfig(self.options["time_frequencies"]).output_dim(1)
        return [position + time] + [self.options["width"]] * self.options["depth"] + [3]

    def init_params(self, seed):
        # the canonical field draws from the same stream it would use on its own
        params = {CANONICAL_PREFIX + name: value for name, value in self.canonical.params.items()}
        rng = np.random.default_rng([seed, 1])
        params.update(init_mlp(rng, self.deformation_sizes(), "deform", get_float_dtype()))
        return params

    @staticmethod
    def _canonical_params(params):
        start = len(CANONICAL_PREFIX)
        return {name[start:]: value for name, value in params.items() if name.startswith(CANONICAL_PREFIX)}

    def displacement(self, params, positions, times):
        times_column = np.asarray(times.values if isinstance(times, Tensor) else times).reshape(-1, 1)
        encoded = concat(
            [
                freq_encode(positions, FrequencyEncodingConfig(self.options["position_frequencies"])),
                freq_encode(Tensor(times_column), FrequencyEncodingConfig(self.options["time_frequencies"])),
            ]
        )
        offset = run_mlp(params, "deform", encoded, len(self.deformation_sizes()) - 1)
        moving = Tensor((times_column > 0).astype(get_float_dtype()))
        return mul(offset, moving)

    def raw_forward(self, params, positions, directions, times):
        times = np.asarray(times.values if isinstance(times, Tensor) else times, dtype=get_float_dtype()).reshape(-1)
        if times.shape[0] != positions.shape[0]:
            raise ContractError("Expected one time per position, got %d for %d" % (times.shape[0], positions.shape[0]))
        if (times < 0).any() or (times > 1).any():
            raise ContractError("Times must lie in [0, 1]")
        moved = clamp(add(positions, self.displacement(params, positions, times)), 0.0, 1.0)
        return self.canonical.raw_forward(self._canonical_params(params), moved, directions, None)

    def mlp_parameter_count(self):
        return self.parameter_count("deform") + self.canonical.mlp_parameter_count()

    def flops_per_query(self):
        return linear_flops(self.deformation_sizes()) + self.canonical.flops_per_query()
