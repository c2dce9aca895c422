import sys

from doccategorizer.cli import main

sys.exit(main())
