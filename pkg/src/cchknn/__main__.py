import sys

from cchknn.cli import main

sys.exit(main())
