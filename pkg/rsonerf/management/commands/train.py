import os

from ...dataset import load_dataset
from ...exceptions import ManifestError
from ...fields import get_field_class
from ...settings import FIELD_KINDS
from ...trainer import train_loop
from ...utils import parse_indices
from ..base import BaseRsoNerfCommand


class Command(BaseRsoNerfCommand):
    help = "Trains a radiance field on a posed dataset and writes checkpoints."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("dataset", help="Dataset directory or transforms.json file.")
        parser.add_argument("kind", help="Field kind: %s." % ", ".join(FIELD_KINDS))
        parser.add_argument(
            "-o", "--out", dest="out", help="Checkpoint directory (default: checkpoints/<kind>).", default=None
        )
        parser.add_argument("--seed", dest="seed", type=int)
        parser.add_argument("--steps", dest="max_steps", type=int)
        parser.add_argument("--rays", dest="rays_per_batch", type=int)
        parser.add_argument("--lr", dest="learning_rate", type=float)
        parser.add_argument("--eval-every", dest="eval_every", type=int)
        parser.add_argument("--samples", dest="samples_per_ray", type=int)
        parser.add_argument("--holdout", dest="holdout", type=parse_indices, help="Comma separated frame indices.")
        parser.add_argument("--holdout-fraction", dest="holdout_fraction", type=float)

    def run(self, *args, **options):
        kind = options["kind"]
        if kind not in FIELD_KINDS:
            raise self.usage_error("Unknown field kind %r, expected one of %s" % (kind, ", ".join(FIELD_KINDS)))
        keys = ("seed", "max_steps", "rays_per_batch", "learning_rate", "eval_every", "samples_per_ray")
        keys += ("holdout", "holdout_fraction")
        config = self.load_config(options, train={key: options[key] for key in keys}, field={"kind": kind})
        data = load_dataset(options["dataset"])
        if get_field_class(kind).requires_time and not data.manifest.has_times:
            raise ManifestError(
                "Field kind %r needs per-frame times; %s has frames without 'time'" % (kind, options["dataset"]),
                field="time",
            )
        train_config = config.train_config(kind)
        out = options["out"] or os.path.join("checkpoints", kind)
        checkpoint, history = train_loop(kind, data, train_config, config.field_options(kind), checkpoint_dir=out)
        if history:
            last = history[-1]
            self.stdout.write("held-out psnr %.3f dB, ssim %.4f" % (last.psnr, last.ssim))
        self.success(
            "Saved checkpoint %s (step %d, running loss %.6g, %.1f s)"
            % (checkpoint.path, checkpoint.step, checkpoint.running_loss, checkpoint.seconds)
        )
