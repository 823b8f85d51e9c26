from ...dataset import load_dataset
from ...settings import FIELD_KINDS
from ...trainer import bench, format_bench_table, speedup
from ..base import BaseRsoNerfCommand


class Command(BaseRsoNerfCommand):
    help = "Measures wall-clock time for each field kind to reach a held-out PSNR target."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("dataset", help="Dataset directory or transforms.json file.")
        parser.add_argument(
            "--kinds", dest="kinds", default="vanilla,instant", help="Comma separated field kinds to compare."
        )
        parser.add_argument("--target", dest="target", type=float, default=25.0, help="Held-out PSNR target in dB.")
        parser.add_argument("--timeout", dest="timeout", type=float, default=600.0, help="Seconds allowed per kind.")
        parser.add_argument("--seed", dest="seed", type=int)
        parser.add_argument("--steps", dest="max_steps", type=int)
        parser.add_argument("--eval-every", dest="eval_every", type=int)
        parser.add_argument("--rays", dest="rays_per_batch", type=int)

    def run(self, *args, **options):
        kinds = [kind.strip() for kind in options["kinds"].split(",") if kind.strip()]
        unknown = [kind for kind in kinds if kind not in FIELD_KINDS]
        if not kinds or unknown:
            raise self.usage_error("Unknown field kinds %s, expected some of %s" % (unknown, ", ".join(FIELD_KINDS)))
        keys = ("seed", "max_steps", "eval_every", "rays_per_batch")
        config = self.load_config(options, train={key: options[key] for key in keys})
        data = load_dataset(options["dataset"])
        rows = bench(
            kinds,
            data,
            options["target"],
            config={kind: config.train_config(kind) for kind in kinds},
            timeout=options["timeout"],
            field_options={kind: config.field_options(kind) for kind in kinds},
        )
        self.stdout.write(format_bench_table(rows))
        factor = speedup(rows)
        if factor is not None:
            self.stdout.write("speedup vanilla/instant: %.2fx" % factor)
        self.success("Benchmarked %d field kinds" % len(rows))
