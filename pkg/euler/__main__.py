"""Run the ``euler`` command with ``python -m euler``."""

import sys

from .cli import main

sys.exit(main())
