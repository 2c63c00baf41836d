import sys

from blockdisc.cli import main

sys.exit(main())
