import sys

from sbscv_lab.runner.cli import main

sys.exit(main())
