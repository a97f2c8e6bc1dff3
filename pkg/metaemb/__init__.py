# SPDX-License-Identifier: LGPL-3.0-only

__version__ = "0.1.0"

from .embeddings import *
from .errors import *
from .evaluation import *
from .losses import *
from .methods import *
from .nn import *
from .registry import *
