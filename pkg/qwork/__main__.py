import sys

from qwork.cli import main

sys.exit(main())
