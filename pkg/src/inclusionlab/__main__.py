import sys

from inclusionlab.cli import main

sys.exit(main())
