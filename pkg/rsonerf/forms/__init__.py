from .config import *  # noqa
from .fields import *  # noqa
