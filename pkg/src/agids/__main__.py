import sys

from agids.cli import main

sys.exit(main())
