import os

from ...dataset import load_dataset
from ...fields import read_blob
from ...metrics import read_lpips_file
from ...trainer import TrainConfig, evaluate, split_holdout
from ...utils import parse_indices
from ..base import BaseRsoNerfCommand


class Command(BaseRsoNerfCommand):
    help = "Computes PSNR and SSIM of a checkpoint against dataset views."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("checkpoint", help="Checkpoint file written by train.")
        parser.add_argument("dataset", help="Dataset directory or transforms.json file.")
        parser.add_argument(
            "--holdout",
            dest="holdout",
            type=parse_indices,
            help="Comma separated frame indices (default: the checkpoint's held-out frames).",
        )
        parser.add_argument("--all", action="store_true", dest="all", default=False, help="Evaluate every frame.")
        parser.add_argument("--lpips-file", dest="lpips_file", help="External per-view LPIPS values.")
        parser.add_argument("--samples", dest="samples_per_ray", type=int)
        parser.add_argument("-o", "--out", dest="out", help="Directory for report.txt and report.jsonl.")

    def run(self, *args, **options):
        config = self.load_config(options, render={"samples_per_ray": options["samples_per_ray"]})
        field, header = read_blob(options["checkpoint"])
        data = load_dataset(options["dataset"])
        train = TrainConfig(**header["train"]) if header.get("train") else TrainConfig()
        if options["all"]:
            indices = list(range(len(data)))
        elif options["holdout"] is not None:
            indices = split_holdout(len(data), holdout=options["holdout"])[1]
        else:
            indices = split_holdout(len(data), train.holdout_fraction, train.holdout)[1] or list(range(len(data)))
        render_cfg = config.render_config(
            **({} if "samples_per_ray" in config["render"] else {"samples_per_ray": train.samples_per_ray}),
            background_rgb=config.get("render", "background_rgb", train.background_rgb),
        )
        report = evaluate(field, data, indices, render_cfg)
        if options["lpips_file"]:
            lpips = read_lpips_file(options["lpips_file"])
            for row in report.rows:
                key = row.view_id if row.view_id in lpips else os.path.splitext(os.path.basename(row.view_id))[0]
                if key not in lpips:
                    raise self.usage_error("No LPIPS value for view %r in %s" % (row.view_id, options["lpips_file"]))
                row.lpips = lpips[key]
        self.stdout.write(report.to_text())
        if options["out"]:
            os.makedirs(options["out"], exist_ok=True)
            with open(os.path.join(options["out"], "report.txt"), "w", encoding="utf-8") as stream:
                stream.write(report.to_text())
            with open(os.path.join(options["out"], "report.jsonl"), "w", encoding="utf-8") as stream:
                stream.write(report.to_records())
        self.success("Evaluated %d views" % len(report.rows))
