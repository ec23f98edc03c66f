import sys

from depas.cli import main

sys.exit(main())
