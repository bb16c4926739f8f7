import sys

from l2sp.cli import main

sys.exit(main())
