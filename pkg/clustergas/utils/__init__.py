from .io import *
from .oracles import *
from .rng import *
