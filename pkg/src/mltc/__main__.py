import sys

from mltc.cli import main

sys.exit(main())
