from ...preprocess import chroma_key_directory
from ..base import BaseRsoNerfCommand


class Command(BaseRsoNerfCommand):
    help = "Removes a key-colour background from every PNG in a directory."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("in_dir", help="Directory of RGB PNG frames.")
        parser.add_argument("out_dir", help="Directory for the RGBA output, file names preserved.")
        parser.add_argument("--key-hue", dest="key_hue", type=float, help="Key hue in degrees.")
        parser.add_argument("--tolerance", dest="hue_tolerance", type=float, help="Hue tolerance in degrees.")
        parser.add_argument("--feather", dest="feather_radius", type=int, help="Alpha feather radius in pixels.")
        parser.add_argument("--despill", dest="despill_strength", type=float, help="Despill strength in [0, 1].")

    def run(self, *args, **options):
        config = self.load_config(
            options,
            chroma={
                key: options[key] for key in ("key_hue", "hue_tolerance", "feather_radius", "despill_strength")
            },
        )
        written = chroma_key_directory(options["in_dir"], options["out_dir"], config.chroma_config())
        if not written:
            self.warning("No PNG images found in %s" % options["in_dir"])
        self.success("Keyed %d images into %s" % (len(written), options["out_dir"]))
