import os

import numpy as np

from ...dataset import default_intrinsics, load_manifest, orbit_poses
from ...fields import read_blob
from ...renderer import render_image, save_png, write_raw
from ...utils import parse_indices, parse_size
from ..base import BaseRsoNerfCommand


GRID_SIDE = 3


def contact_sheet(images, columns=GRID_SIDE):
    """
    Tiles equally sized images row-major into one image.
    """
    rows = [np.concatenate(images[start : start + columns], axis=1) for start in range(0, len(images), columns)]
    return np.concatenate(rows, axis=0)


class Command(BaseRsoNerfCommand):
    help = "Renders images from a trained checkpoint at dataset poses or on an orbit."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("checkpoint", help="Checkpoint file written by train.")
        parser.add_argument("out_dir", help="Directory for the rendered images.")
        parser.add_argument("--dataset", dest="dataset", help="Manifest (or dataset directory) supplying the poses.")
        parser.add_argument(
            "--frames", dest="frames", type=parse_indices, help="Frame indices to render (default all)."
        )
        parser.add_argument("--views", dest="views", type=int, default=8, help="Orbit views when no dataset is given.")
        parser.add_argument("--size", dest="size", type=parse_size, help="Output size as WIDTHxHEIGHT.")
        parser.add_argument("--samples", dest="samples_per_ray", type=int)
        parser.add_argument("--time", dest="time", type=float, help="Time in [0, 1] for deformation fields.")
        parser.add_argument(
            "--grid",
            action="store_true",
            dest="grid",
            default=False,
            help="Render a 3x3 grid of azimuth offsets around each view plus a contact sheet.",
        )
        parser.add_argument("--grid-step", dest="grid_step", type=float, help="Azimuth step of the grid in degrees.")
        parser.add_argument("--raw", action="store_true", dest="raw", default=False, help="Also write float32 dumps.")
        parser.add_argument(
            "--opacity", action="store_true", dest="opacity", default=False, help="Also write opacity maps."
        )

    def views(self, options):
        """
        ``(name, pose, time)`` for every requested view, plus the intrinsics.
        """
        if options["dataset"]:
            path = options["dataset"]
            manifest = load_manifest(os.path.join(path, "transforms.json") if os.path.isdir(path) else path)
            indices = options["frames"] if options["frames"] is not None else range(len(manifest))
            times = manifest.times() if manifest.has_times else None
            views = []
            for index in indices:
                name = os.path.splitext(os.path.basename(manifest.frames[index].file_path))[0]
                views.append((name, manifest.unit_pose(index), None if times is None else float(times[index])))
            return manifest.intrinsics, views
        count = options["views"]
        poses = orbit_poses([index * 360.0 / count for index in range(count)], 1.5, 0.25)
        return default_intrinsics(), [("orbit_%03d" % index, pose, None) for index, pose in enumerate(poses)]

    def write(self, out_dir, name, image, options):
        save_png(os.path.join(out_dir, name + ".png"), image[..., :3])
        if options["opacity"]:
            save_png(os.path.join(out_dir, name + "_opacity.png"), np.repeat(image[..., 3:], 3, axis=-1))
        if options["raw"]:
            write_raw(os.path.join(out_dir, name + ".raw"), image)

    def run(self, *args, **options):
        config = self.load_config(
            options,
            render={
                "samples_per_ray": options["samples_per_ray"],
                "time": options["time"],
                "grid_step": options["grid_step"],
            },
        )
        field, header = read_blob(options["checkpoint"])
        render_cfg = config.render_config()
        intr, views = self.views(options)
        size = options["size"] or (config.get("render", "width"), config.get("render", "height"))
        if size[0] and size[1]:
            intr = intr.scaled(*size)
        os.makedirs(options["out_dir"], exist_ok=True)
        step = config.get("render", "grid_step", 10.0)
        offsets = [(index - (GRID_SIDE**2 - 1) / 2) * step for index in range(GRID_SIDE**2)]
        written = 0
        for name, pose, frame_time in views:
            time = None
            if field.requires_time:
                time = config.get("render", "time", frame_time if frame_time is not None else 0.0)
            if not options["grid"]:
                self.write(options["out_dir"], name, render_image(intr, pose, field, render_cfg, time=time), options)
                written += 1
                continue
            tiles = []
            for position, offset in enumerate(offsets):
                image = render_image(intr, pose.orbited(offset), field, render_cfg, time=time)
                self.write(options["out_dir"], "%s_grid_%d" % (name, position), image, options)
                tiles.append(image[..., :3])
                written += 1
            save_png(os.path.join(options["out_dir"], "%s_contact_sheet.png" % name), contact_sheet(tiles))
        self.success(
            "Rendered %d images from %s (step %d) into %s" % (written, field.kind, header["step"], options["out_dir"])
        )
