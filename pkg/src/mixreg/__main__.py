import sys

from mixreg.cli import main

sys.exit(main())
