import sys

from nohd.harness import main

sys.exit(main())
