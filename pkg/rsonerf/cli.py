"""
``rsonerf`` console script: configures a minimal Django project around the app and dispatches to its
management commands (``rsonerf synth``, ``rsonerf train``, ...).
"""
import os
import sys

import django
from django.conf import settings
from django.core.management import ManagementUtility


def logging_config(level):
    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {"plain": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"}},
        "handlers": {"console": {"class": "logging.StreamHandler", "formatter": "plain"}},
        "loggers": {"rsonerf": {"handlers": ["console"], "level": level, "propagate": False}},
    }


def configure(**overrides):
    if not settings.configured:
        level = os.environ.get("RSONERF_LOG_LEVEL", "INFO").upper()
        options = {
            "INSTALLED_APPS": ["rsonerf"],
            "RSONERF_LOG_LEVEL": level,
            "LOGGING": logging_config(level),
        }
        options.update(overrides)
        settings.configure(**options)
    django.setup()


def main(argv=None):
    configure()
    utility = ManagementUtility(list(argv) if argv is not None else sys.argv)
    utility.prog_name = "rsonerf"
    utility.execute()


if __name__ == "__main__":
    main()
