import sys

from dhjkit.cli import main

sys.exit(main())
