import sys

from metricloop.cli import main

sys.exit(main())
