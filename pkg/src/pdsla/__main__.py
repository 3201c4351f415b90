import sys

from pdsla.cli import main

sys.exit(main())
