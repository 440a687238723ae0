"""Entry point for ``python -m geodiss``."""
from .cli import main

raise SystemExit(main())
