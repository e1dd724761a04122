import sys

from .toplevel import main

sys.exit(main())
