from .constants import *
from .errors import LocalNOError

__all__ = ['LocalNOError']
