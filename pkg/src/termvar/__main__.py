import sys

from termvar.cli import main

sys.exit(main())
