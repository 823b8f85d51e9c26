import numpy as np

from ..autodiff import activation, concat, linear
from ..encodings import FrequencyEncodingConfig, freq_encode
from ..exceptions import ContractError
from ..settings import get_float_dtype
from .base import BaseField, init_mlp, linear_flops


class VanillaField(BaseField):
    """
    Deep fully connected field: frequency-encoded position through a wide trunk with one skip connection,
    softplus density off the trunk, colour branch fed by trunk features and the encoded view direction.
    """

    kind = "vanilla"
    default_depth = 8
    default_skip_layer = 5

    def clean_options(self, options):
        cleaned = {
            "depth": self.default_depth,
            "width": 256,
            "skip_layer": min(self.default_skip_layer, options.get("depth", self.default_depth)),
            "color_width": 128,
            "position_frequencies": 10,
            "direction_frequencies": 4,
        }
        cleaned.update(options)
        # skip_layer == depth leaves the trunk without a skip connection
        if not 1 <= cleaned["skip_layer"] <= cleaned["depth"]:
            raise ContractError(
                "skip_layer must lie in [1, depth=%d], got %r" % (cleaned["depth"], cleaned["skip_layer"])
            )
        return cleaned

    @property
    def position_encoding(self):
        return FrequencyEncodingConfig(self.options["position_frequencies"], include_input=True)

    @property
    def direction_encoding(self):
        return FrequencyEncodingConfig(self.options["direction_frequencies"], include_input=True)

    def trunk_sizes(self):
        width, depth, skip = self.options["width"], self.options["depth"], self.options["skip_layer"]
        pos_dim = self.position_encoding.output_dim(3)
        inputs = [pos_dim] + [width] * (depth - 1)
        if skip < depth:
            inputs[skip] += pos_dim
        return [(fan_in, width) for fan_in in inputs]

    def init_params(self, seed):
        rng = np.random.default_rng(seed)
        dtype = get_float_dtype()
        width, color_width = self.options["width"], self.options["color_width"]
        params = {}
        for index, (fan_in, fan_out) in enumerate(self.trunk_sizes()):
            layer = init_mlp(rng, [fan_in, fan_out], "trunk", dtype)
            params["trunk.%d.weight" % index] = layer["trunk.0.weight"]
            params["trunk.%d.bias" % index] = layer["trunk.0.bias"]
        params.update(init_mlp(rng, [width, 1], "density", dtype))
        params.update(init_mlp(rng, [width, width], "feature", dtype))
        dir_dim = self.direction_encoding.output_dim(3)
        params.update(init_mlp(rng, [width + dir_dim, color_width, 3], "color", dtype))
        return params

    def raw_forward(self, params, positions, directions, times):
        encoded = freq_encode(positions, self.position_encoding)
        h = encoded
        for index in range(self.options["depth"]):
            if index == self.options["skip_layer"]:
                h = concat([h, encoded])
            h = activation(linear(h, params["trunk.%d.weight" % index], params["trunk.%d.bias" % index]), "relu")
        sigma = activation(linear(h, params["density.0.weight"], params["density.0.bias"]), "softplus")
        feature = linear(h, params["feature.0.weight"], params["feature.0.bias"])
        h = concat([feature, freq_encode(directions, self.direction_encoding)])
        h = activation(linear(h, params["color.0.weight"], params["color.0.bias"]), "relu")
        rgb = activation(linear(h, params["color.1.weight"], params["color.1.bias"]), "sigmoid")
        return sigma, rgb

    def mlp_parameter_count(self):
        return self.parameter_count()

    def flops_per_query(self):
        width, color_width = self.options["width"], self.options["color_width"]
        dir_dim = self.direction_encoding.output_dim(3)
        flops = sum(linear_flops(list(sizes)) for sizes in self.trunk_sizes())
        flops += linear_flops([width, 1]) + linear_flops([width, width])
        flops += linear_flops([width + dir_dim, color_width, 3])
        # two transcendental evaluations per encoded component
        flops += 2 * 3 * (self.options["position_frequencies"] + self.options["direction_frequencies"])
        return flops
