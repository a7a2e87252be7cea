"""Defines the main clustergas API."""

__version__ = "0.1.0"

from .clusters import *
from .config import *
from .engine import *
from .errors import *
from .events import *
from .expansion import *
from .functionals import *
from .geometry import *
from .invariants import *
from .limits import *
from .sampler import *
from .stats import *
from .task import *
from .trees import *
from .types import *
from .utils import *
