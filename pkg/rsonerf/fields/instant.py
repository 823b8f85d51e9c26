import numpy as np

from ..autodiff import activation, concat, linear
from ..encodings import FrequencyEncodingConfig, HashGridConfig, HashGridTable, freq_encode, hash_encode
from ..settings import get_float_dtype
from .base import BaseField, init_mlp, linear_flops, run_mlp


class InstantField(BaseField):
    """
    Hash-grid encoded position feeding a tiny MLP. Density comes off the first hidden stage through a clamped
    exponential; colour comes off the last stage after the encoded view direction is appended.
    """

    kind = "instant"

    def clean_options(self, options):
        grid = options.pop("hash_grid", None)
        if grid is None:
            grid = HashGridConfig.default()
        elif isinstance(grid, dict):
            grid = HashGridConfig.from_options(grid)
        cleaned = {"hidden": (64, 80, 64), "direction_frequencies": 4}
        cleaned.update(options)
        cleaned["hidden"] = tuple(cleaned["hidden"])
        cleaned["hash_grid"] = grid
        return cleaned

    @property
    def grid(self) -> HashGridConfig:
        return self.options["hash_grid"]

    @property
    def direction_encoding(self):
        return FrequencyEncodingConfig(self.options["direction_frequencies"], include_input=True)

    def config(self):
        config = dict(self.options)
        config["hidden"] = list(config["hidden"])
        config["hash_grid"] = self.grid.as_dict()
        return config

    def mlp_sizes(self):
        return [self.grid.output_dim] + list(self.options["hidden"])

    def init_params(self, seed):
        rng = np.random.default_rng(seed)
        dtype = get_float_dtype()
        table = HashGridTable.initialize(self.grid, rng, dtype)
        params = {"hash.%d" % level: entries for level, entries in enumerate(table.levels)}
        hidden = self.options["hidden"]
        params.update(init_mlp(rng, self.mlp_sizes(), "mlp", dtype))
        params.update(init_mlp(rng, [hidden[0], 1], "density", dtype))
        params.update(init_mlp(rng, [hidden[-1] + self.direction_encoding.output_dim(3), 3], "color", dtype))
        return params

    def raw_forward(self, params, positions, directions, times):
        tables = [params["hash.%d" % level] for level in range(self.grid.levels)]
        encoded = hash_encode(positions, tables, self.grid)
        first = activation(linear(encoded, params["mlp.0.weight"], params["mlp.0.bias"]), "relu")
        sigma = activation(linear(first, params["density.0.weight"], params["density.0.bias"]), "exp")
        stages = len(self.options["hidden"])
        h = first
        for index in range(1, stages):
            h = activation(linear(h, params["mlp.%d.weight" % index], params["mlp.%d.bias" % index]), "relu")
        h = concat([h, freq_encode(directions, self.direction_encoding)])
        rgb = run_mlp(params, "color", h, 1, last="sigmoid")
        return sigma, rgb

    def mlp_parameter_count(self):
        return sum(value.size for name, value in self.params.items() if not name.startswith("hash."))

    def flops_per_query(self):
        hidden = self.options["hidden"]
        flops = linear_flops(self.mlp_sizes()) + linear_flops([hidden[0], 1])
        flops += linear_flops([hidden[-1] + self.direction_encoding.output_dim(3), 3])
        # per level: 8 corner weights (3 products each) and an F-wide weighted sum
        flops += self.grid.levels * 8 * (3 + 2 * self.grid.features_per_level)
        flops += 2 * 3 * self.options["direction_frequencies"]
        return flops
