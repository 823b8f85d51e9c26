import math

from ...dataset import (
    KEY_GREEN,
    LIGHTING_CASES,
    default_intrinsics,
    default_satellite,
    generate_dataset,
    generate_spin_dataset,
    green_screen_background,
    write_dataset,
)
from ...dataset.synth import DEFAULT_FOV, GROUND_TRUTH_SAMPLES
from ...utils import parse_size
from ..base import BaseRsoNerfCommand


class Command(BaseRsoNerfCommand):
    help = "Renders a synthetic posed dataset of the analytic satellite scene."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("out", help="Output dataset directory.")
        parser.add_argument("--case", dest="case", help="Lighting case preset: %s." % ", ".join(LIGHTING_CASES))
        parser.add_argument("--views", dest="views", type=int, help="Number of orbit views.")
        parser.add_argument("--radius", dest="radius", type=float, help="Orbit radius in unit-cube lengths.")
        parser.add_argument("--lighting", dest="lighting", type=float, help="Lamp intensity scale in (0, 1].")
        parser.add_argument("--spin", dest="spin", type=float, help="Target yaw rate in degrees per second.")
        parser.add_argument("--fps", dest="fps", type=float, help="Frame rate of the spin sequence.")
        parser.add_argument("--frames", dest="frames", type=int, help="Number of spin frames.")
        parser.add_argument("--size", dest="size", type=parse_size, help="Image size as WIDTHxHEIGHT.")
        parser.add_argument("--samples", dest="samples", type=int, help="Samples per ray for the ground truth.")
        parser.add_argument("--seed", dest="seed", type=int)
        parser.add_argument(
            "--green-screen",
            action="store_true",
            dest="green_screen",
            default=None,
            help="Composite frames over a key-green screen instead of writing RGBA.",
        )
        parser.add_argument(
            "--shadow", dest="shadow", type=float, help="Darkening of the screen band behind the target."
        )

    def run(self, *args, **options):
        size = options["size"] or (None, None)
        config = self.load_config(
            options,
            synth={
                "case": options["case"],
                "views": options["views"],
                "radius": options["radius"],
                "lighting": options["lighting"],
                "spin": options["spin"],
                "fps": options["fps"],
                "frames": options["frames"],
                "width": size[0],
                "height": size[1],
                "samples": options["samples"],
                "seed": options["seed"],
                "green_screen": options["green_screen"],
                "shadow": options["shadow"],
            },
        )
        synth = config["synth"]
        preset = LIGHTING_CASES.get(synth.get("case"), {})
        spinning = "spin" in synth or "frames" in synth or preset.get("trajectory") == "spin"
        fov = math.radians(synth["fov"]) if "fov" in synth else DEFAULT_FOV
        intr = default_intrinsics(synth.get("width"), synth.get("height"), fov)
        common = {
            "intr": intr,
            "seed": synth.get("seed", 0),
            "radius": synth.get("radius", 1.5),
            "lighting_scale": synth.get("lighting", preset.get("lighting", 1.0)),
            "height": synth.get("camera_height", 0.25),
            "samples": synth.get("samples", GROUND_TRUTH_SAMPLES),
            "aabb_scale": synth.get("aabb_scale", 1.0),
        }
        scene = default_satellite(**({"density": synth["density"]} if "density" in synth else {}))
        if spinning:
            data = generate_spin_dataset(
                scene,
                n_frames=synth.get("frames", 80),
                spin_rate_deg_per_s=synth.get("spin", 10.0),
                frame_rate=synth.get("fps", 2.0),
                **common,
            )
        else:
            data = generate_dataset(scene, n_views=synth.get("views", 36), **common)
        background = None
        if synth.get("green_screen"):
            shadow = synth.get("shadow", preset.get("shadow", 0.0))
            background = green_screen_background(intr.height, intr.width, KEY_GREEN, shadow=shadow)
        write_dataset(data, options["out"], background=background)
        self.success("Wrote %d frames to %s" % (len(data), options["out"]))
