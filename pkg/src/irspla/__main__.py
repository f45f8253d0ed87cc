"""``python -m irspla``."""

from .cli import main

raise SystemExit(main())
