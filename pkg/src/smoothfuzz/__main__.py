import sys

from smoothfuzz.cli import main

sys.exit(main())
