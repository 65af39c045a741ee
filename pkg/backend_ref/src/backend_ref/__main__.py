import sys

from backend_ref.cli import main

sys.exit(main())
