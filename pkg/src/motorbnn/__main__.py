import sys

from motorbnn.cli import main

sys.exit(main())
