"""Allow ``python -m eureka``."""

import sys

from .cli import main

sys.exit(main())
