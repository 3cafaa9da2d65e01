import sys

from lexrationale.cli import main

sys.exit(main())
