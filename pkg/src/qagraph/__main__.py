import sys

from qagraph.cli import main

sys.exit(main())
