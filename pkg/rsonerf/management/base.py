import logging

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from ..exceptions import NonFiniteLoss, RsoNerfError
from ..forms import RunConfig
from ..settings import LOG_LEVEL


# Exit statuses
USAGE_ERROR = 2
RUNTIME_ABORT = 3


def format_validation_error(error: ValidationError):
    if hasattr(error, "error_dict"):
        return "\n".join(
            "%s: %s" % (key, message) for key, messages in sorted(error.message_dict.items()) for message in messages
        )
    return "\n".join(error.messages)


class BaseRsoNerfCommand(BaseCommand):
    """
    Basic command for the reconstruction pipeline.
    Provides ``--config`` and repeatable ``--set section.key=value`` arguments and maps package errors to
    exit statuses: 2 for invalid input, 3 for aborted training.
    """

    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument(
            "-c",
            "--config",
            action="store",
            dest="config",
            help="JSON run configuration file.",
            required=False,
            default=None,
        )
        parser.add_argument(
            "--set",
            action="append",
            dest="overrides",
            metavar="SECTION.KEY=VALUE",
            help="Override one configuration value; may be repeated.",
            default=[],
        )

    def success(self, message):
        self.stdout.write(self.style.SUCCESS(message))

    def warning(self, message):
        self.stderr.write(self.style.WARNING(message))

    def usage_error(self, message):
        return CommandError("%s\n%s" % (message, self.create_parser("rsonerf", self.name).format_usage()), returncode=2)

    @property
    def name(self):
        return self.__module__.rsplit(".", 1)[-1]

    def load_config(self, options, **sections):
        """
        Reads ``--config`` and applies, in order, the dedicated flags given as ``section={key: value}``
        keyword arguments (``None`` values are skipped) and then every ``--set`` override.
        """
        overrides = []
        for section, values in sections.items():
            overrides.extend((section, key, value) for key, value in values.items() if value is not None)
        overrides.extend(options.get("overrides") or [])
        return RunConfig.load(options.get("config"), overrides)

    def handle(self, *args, **options):
        logging.getLogger("rsonerf").setLevel(logging.DEBUG if options.get("verbosity", 1) > 1 else LOG_LEVEL)
        try:
            return self.run(*args, **options)
        except ValidationError as exc:
            raise CommandError(format_validation_error(exc), returncode=USAGE_ERROR)
        except NonFiniteLoss as exc:
            raise CommandError(str(exc), returncode=RUNTIME_ABORT)
        except (RsoNerfError, OSError) as exc:
            raise CommandError(str(exc), returncode=USAGE_ERROR)

    def run(self, *args, **options):
        raise NotImplementedError
