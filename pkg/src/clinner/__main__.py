"""``python -m clinner``."""
import sys

from .cli import main

sys.exit(main())
