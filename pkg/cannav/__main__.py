import sys

from cannav.main import main

sys.exit(main())
