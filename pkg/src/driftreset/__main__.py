import sys

from driftreset.cli import main

sys.exit(main())
