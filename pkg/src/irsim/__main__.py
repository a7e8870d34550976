import sys

from irsim.lab.cli import main

sys.exit(main())
