from facemixup.cli import main
import sys

sys.exit(main())
