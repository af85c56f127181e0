import sys

from retroplan.harness.cli import main

sys.exit(main())
