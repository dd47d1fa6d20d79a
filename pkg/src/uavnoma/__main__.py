import sys

from uavnoma.cli import main

sys.exit(main())
