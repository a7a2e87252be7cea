from .compare import *
from .ensemble import *
from .validate import *
