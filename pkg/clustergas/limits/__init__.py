from .coagulation import *
from .dsmc import *
