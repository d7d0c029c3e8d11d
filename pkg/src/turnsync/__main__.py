import sys

from turnsync.cli import main

sys.exit(main())
