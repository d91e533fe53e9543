import sys

from bizsel.cli import main

sys.exit(main())
