import sys

from noisympo.cli import main

sys.exit(main())
