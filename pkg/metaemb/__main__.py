# SPDX-License-Identifier: LGPL-3.0-only

import sys

from .cli import main

sys.exit(main())
