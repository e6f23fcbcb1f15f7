"""Allow ``python -m gratingsweep``."""

import sys

from .cli import main

sys.exit(main())
